#include "runner.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <openssl/evp.h>

#include "sfdde/error.hpp"
#include "sfdde/parallel.hpp"
#include "sfdde/robustness.hpp"

#ifndef SFDDE_VERSION
#define SFDDE_VERSION "0.0.0"
#endif

namespace sfdde::cli {

std::string git_blob_sha1(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, content.data(), content.size());
  EVP_DigestFinal_ex(ctx, digest, &length);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

std::string default_out_dir() {
  if (const char* env = std::getenv("SFDDE_OUT_DIR"); env && *env) return env;
  return "sfdde-out";
}

namespace {

namespace fs = std::filesystem;

class Artifacts {
 public:
  Artifacts(std::string dir, RunResult& result) : dir_(std::move(dir)), result_(result) {}

  void save(const std::string& name, const std::string& content) {
    std::ofstream out(fs::path(dir_) / name, std::ios::binary);
    out << content;
    if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + (fs::path(dir_) / name).string());
    result_.artifacts.push_back(name);
  }

  void check(bool pass, std::string name, std::string detail) {
    result_.summary.push_back({pass, std::move(name), std::move(detail)});
  }

 private:
  std::string dir_;
  RunResult& result_;
};

std::string num(double x) { return format_number(x); }

void run_simulate(const ExperimentConfig& c, Artifacts& art, int threads) {
  const TimeGrid grid(c.model.delay, c.horizon, c.dt);
  const NoiseGenerator gen(c.model, c.horizon, c.dt, c.eps_ref);
  const JumpTreatment treatment = reference_treatment(c.model, c.eps_ref);
  std::vector<CadlagPath> paths;
  if (c.model.mean_field()) {
    std::vector<NoiseRecord> noises;
    for (std::size_t i = 0; i < c.paths; ++i) noises.push_back(gen.generate(c.seed, i));
    for (auto& r : euler_solve_ensemble(c.model, c.eta.view(), grid, noises, treatment, threads)) {
      paths.push_back(std::move(r.path));
    }
  } else {
    std::vector<std::optional<CadlagPath>> slots(c.paths);
    parallel_for(c.paths, threads, [&](std::size_t i) {
      slots[i] = euler_solve(c.model, c.eta.view(), grid, gen.generate(c.seed, i), treatment).path;
    });
    for (auto& s : slots) paths.push_back(std::move(*s));
  }
  for (std::size_t i = 0; i < paths.size(); ++i) {
    std::ostringstream out;
    write_path_csv(out, paths[i]);
    char name[32];
    std::snprintf(name, sizeof name, "path_%05zu.csv", i);
    art.save(name, out.str());
  }
}

void run_robustness(const ExperimentConfig& c, Artifacts& art, int threads) {
  RobustnessSweep sweep;
  sweep.eps_ref = c.eps_ref;
  sweep.eps_list = c.eps_list;
  sweep.p = c.p;
  sweep.setup = {c.paths, c.seed, threads};
  const auto report = coupled_sweep(c.model, c.eta.view(), TimeGrid(c.model.delay, c.horizon, c.dt), sweep);
  std::ostringstream csv, side;
  write_sweep_csv(csv, report);
  write_sweep_summary(side, report);
  art.save("sweep.csv", csv.str());
  art.save("sweep_summary.txt", side.str());
  const auto& a = c.asserts;
  if (a.slope_min || a.slope_max) {
    const double lo = a.slope_min.value_or(-INFINITY), hi = a.slope_max.value_or(INFINITY);
    art.check(report.fitted && report.slope >= lo && report.slope <= hi, "robustness_slope",
              "slope " + num(report.slope) + " in [" + num(lo) + ", " + num(hi) + "]");
  }
  if (a.decreasing) art.check(decreasing_within_noise(report), "robustness_decreasing", "error_est along eps_list");
}

void run_ito(const ExperimentConfig& c, Artifacts& art) {
  const TimeGrid grid(c.model.delay, c.horizon, c.dt);
  const NoiseGenerator gen(c.model, c.horizon, c.dt, c.eps_ref);
  SolveOptions options;
  options.record_jumps = true;
  options.cache_coefficients = true;
  const auto report = euler_solve(c.model, c.eta.view(), grid, gen.generate(c.seed, 0),
                                  reference_treatment(c.model, c.eps_ref), options);
  const auto integral = ito_residual(*c.functional, report, c.model, c.check_t);
  std::ostringstream a;
  write_residual_csv(a, integral);
  art.save("residual.csv", a.str());
  double largest = 0.0, gap = 0.0;
  for (const auto& pt : integral) largest = std::max(largest, std::abs(pt.residual));
  if (c.model.has_jumps()) {
    const auto jumpform = ito_residual_jumpform(*c.functional, report, c.model, c.check_t);
    std::ostringstream b;
    write_residual_csv(b, jumpform);
    art.save("residual_jumpform.csv", b.str());
    for (std::size_t i = 0; i < integral.size(); ++i) {
      gap = std::max(gap, std::abs(integral[i].residual - jumpform[i].residual));
    }
  }
  if (c.asserts.forms_agree) {
    art.check(gap <= *c.asserts.forms_agree, "ito_forms_agree",
              "max |integral - jump form| " + num(gap) + " <= " + num(*c.asserts.forms_agree));
  }
  if (c.asserts.max_residual) {
    art.check(largest <= *c.asserts.max_residual, "ito_residual",
              "max |residual| " + num(largest) + " <= " + num(*c.asserts.max_residual));
  }
}

void run_picard(const ExperimentConfig& c, Artifacts& art, int threads) {
  const TimeGrid grid(c.model.delay, c.horizon, c.dt);
  const NoiseGenerator gen(c.model, c.horizon, c.dt, c.eps_ref);
  const auto report = picard_experiment(c.model, c.eta.view(), grid, gen, reference_treatment(c.model, c.eps_ref),
                                        c.kmax, {c.paths, c.seed, threads}, c.fit_first, c.fit_last);
  std::ostringstream out;
  write_gap_csv(out, report);
  art.save("gaps.csv", out.str());
  const auto& a = c.asserts;
  if (a.factorial_slope) {
    art.check(report.fitted && std::abs(report.factorial_slope - *a.factorial_slope) <= a.factorial_tolerance,
              "picard_factorial_slope",
              "slope " + num(report.factorial_slope) + " vs " + num(*a.factorial_slope) + " +- " +
                  num(a.factorial_tolerance));
  }
  if (a.gaps_decreasing_from) {
    bool ok = true;
    // gap[i] is e_{i+1}
    for (std::size_t i = static_cast<std::size_t>(std::max(1, *a.gaps_decreasing_from)); i < report.gap.size(); ++i) {
      if (!(report.gap[i] < report.gap[i - 1])) ok = false;
    }
    art.check(ok, "picard_gaps_decreasing", "e_k strictly decreasing from k = " + std::to_string(*a.gaps_decreasing_from));
  }
}

void run_fk(const ExperimentConfig& c, Artifacts& art, int threads, const std::string& hash) {
  const auto est = fk_estimate(c.model, c.payoff, c.fk_t, c.eta.view(), c.horizon, c.eps_ref, {c.paths, c.seed, threads});
  std::ostringstream out;
  write_fk_record(out, est, hash);
  art.save("fk.txt", out.str());
  if (c.asserts.expected) {
    const double half = c.asserts.z * est.standard_error;
    art.check(std::abs(est.value - *c.asserts.expected) <= half, "fk_closed_form",
              "|" + num(est.value) + " - " + num(*c.asserts.expected) + "| <= " + num(half));
  }
  if (c.flow) {
    const double deviation = flow_check(c.model, c.eta.view(), c.flow->first, c.flow->second, c.eps_ref, c.seed);
    std::ostringstream f;
    f << "t1: " << num(c.flow->first) << "\nt2: " << num(c.flow->second) << "\ndeviation: " << num(deviation) << '\n';
    art.save("flow.txt", f.str());
    if (c.asserts.flow_exact) art.check(deviation == 0.0, "flow_exact", "deviation " + num(deviation));
  }
}

void run_noise_info(const ExperimentConfig& c, Artifacts& art, int threads) {
  std::ostringstream out;
  out << "eps,row,col,lambda_sq,compensator,rate,bound_proxy\n";
  const auto& M = c.model;
  if (M.n > 0) {
    for (double eps : c.info_eps) {
      const Eigen::MatrixXd lam = sigma_eps(M.scaling, M.nu, eps);
      const Eigen::MatrixXd comp = compensator_integral(M.scaling, M.nu, eps);
      const double proxy = bound_proxy(M, eps, c.p);
      for (int j = 0; j < M.n; ++j) {
        const double rate = M.nu[static_cast<std::size_t>(j)].mass(MagnitudeBand::at_or_above(eps));
        for (int i = 0; i < M.k; ++i) {
          out << num(eps) << ',' << i << ',' << j << ',' << num(lam(i, j) * lam(i, j)) << ',' << num(comp(i, j)) << ','
              << num(rate) << ',' << num(proxy) << '\n';
        }
      }
    }
  }
  art.save("noise_info.csv", out.str());
  if (c.variance_eps && M.n > 0) {
    const auto report = variance_preservation_check(M.scaling, M.nu, *c.variance_eps, c.eps_ref, c.horizon,
                                                    c.variance_samples, c.seed, threads);
    std::ostringstream v;
    v << "row,col,predicted,omitted,sample_variance,ci_low,ci_high,pass\n";
    for (const auto& e : report.entries) {
      v << e.row << ',' << e.col << ',' << num(e.predicted) << ',' << num(e.omitted) << ',' << num(e.sample_variance)
        << ',' << num(e.ci_low) << ',' << num(e.ci_high) << ',' << (e.pass ? 1 : 0) << '\n';
    }
    art.save("variance.csv", v.str());
    if (c.asserts.variance_preserved) {
      art.check(report.pass(), "variance_preserved", "99% chi-square interval covers T Lambda(eps)^2");
    }
  }
}

bool numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::AtomOffGrid:
    case ErrorCode::GridMisaligned:
      return false;
    default:
      return true;
  }
}

}  // namespace

RunResult execute(const ExperimentConfig& config, const std::string& out_dir, int threads,
                  const std::string& config_hash) {
  RunResult result;
  Artifacts art(out_dir, result);
  switch (config.family) {
    case Family::Simulate: run_simulate(config, art, threads); break;
    case Family::Robustness: run_robustness(config, art, threads); break;
    case Family::ItoCheck: run_ito(config, art); break;
    case Family::Picard: run_picard(config, art, threads); break;
    case Family::Fk: run_fk(config, art, threads, config_hash); break;
    case Family::NoiseInfo: run_noise_info(config, art, threads); break;
  }
  return result;
}

int validate(const std::string& config, std::ostream& out) {
  std::vector<Diagnostic> diagnostics;
  try {
    const YAML::Node tree = load_tree(config);
    build_config(tree, diagnostics);
  } catch (const Error& e) {
    out << config << ": " << e.what() << '\n';
    return 2;
  }
  for (const auto& d : diagnostics) out << config << ": " << to_string(d) << '\n';
  return diagnostics.empty() ? 0 : 2;
}

RunResult run(const RunOptions& options, std::ostream& log) {
  const auto started = std::chrono::steady_clock::now();
  RunResult failed;
  failed.exit_code = 2;

  YAML::Node tree;
  std::string source;
  try {
    tree = load_tree(options.config);
    std::ifstream in(options.config, std::ios::binary);
    source.assign(std::istreambuf_iterator<char>(in), {});
  } catch (const Error& e) {
    log << "config error: " << options.config << ": " << e.what() << '\n';
    return failed;
  }
  std::vector<Diagnostic> diagnostics;
  apply_overrides(tree, options.overrides, diagnostics);
  if (options.seed) tree["noise"]["seed"] = *options.seed;
  auto config = build_config(tree, diagnostics);
  if (!config || !diagnostics.empty()) {
    for (const auto& d : diagnostics) log << "config error: " << options.config << ": " << to_string(d) << '\n';
    return failed;
  }

  YAML::Emitter echo;
  echo << tree;
  const std::string effective = std::string(echo.c_str()) + '\n';
  const std::string hash = git_blob_sha1(effective);

  std::error_code ec;
  fs::create_directories(options.out_dir, ec);
  if (ec) {
    log << "cannot create output directory " << options.out_dir << ": " << ec.message() << '\n';
    return failed;
  }

  RunResult result;
  try {
    result = execute(*config, options.out_dir, options.threads, hash);
  } catch (const Error& e) {
    log << "error: " << family_name(config->family) << ": " << e.what() << '\n';
    failed.exit_code = numerical(e.code()) ? 1 : 2;
    return failed;
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  std::ostringstream summary;
  summary << "family: " << family_name(config->family) << '\n';
  for (const auto& line : result.summary) {
    summary << (line.pass ? "PASS " : "FAIL ") << line.name << ": " << line.detail << '\n';
  }
  {
    std::ofstream out(fs::path(options.out_dir) / "summary.txt", std::ios::binary);
    out << summary.str();
  }
  log << summary.str();

  YAML::Emitter manifest;
  manifest << YAML::BeginMap;
  manifest << YAML::Key << "tool" << YAML::Value << "sfdde";
  manifest << YAML::Key << "version" << YAML::Value << SFDDE_VERSION;
  manifest << YAML::Key << "family" << YAML::Value << family_name(config->family);
  manifest << YAML::Key << "config_path" << YAML::Value << options.config;
  manifest << YAML::Key << "config_source_sha1" << YAML::Value << git_blob_sha1(source);
  manifest << YAML::Key << "config_sha1" << YAML::Value << hash;
  manifest << YAML::Key << "seed" << YAML::Value << config->seed;
  manifest << YAML::Key << "threads" << YAML::Value << options.threads;
  manifest << YAML::Key << "overrides" << YAML::Value << YAML::Flow << options.overrides;
  manifest << YAML::Key << "wall_seconds" << YAML::Value << wall;
  manifest << YAML::Key << "artifacts" << YAML::Value << YAML::BeginSeq;
  for (const auto& name : result.artifacts) {
    std::ifstream in(fs::path(options.out_dir) / name, std::ios::binary);
    const std::string content((std::istreambuf_iterator<char>(in)), {});
    manifest << YAML::BeginMap << YAML::Key << "file" << YAML::Value << name << YAML::Key << "sha1" << YAML::Value
             << git_blob_sha1(content) << YAML::EndMap;
  }
  manifest << YAML::EndSeq;
  manifest << YAML::Key << "config" << YAML::Value << tree;
  manifest << YAML::EndMap;
  {
    std::ofstream out(fs::path(options.out_dir) / "manifest.yaml", std::ios::binary);
    out << manifest.c_str() << '\n';
  }
  result.exit_code = 0;
  return result;
}

}  // namespace sfdde::cli
