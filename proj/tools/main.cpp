#include <iostream>

#include <CLI11.hpp>

#include "runner/runner.hpp"
#include "sfdde/parallel.hpp"

int main(int argc, char** argv) {
  CLI::App app{"sfdde: experiments for stochastic functional delay equations with jumps"};
  app.require_subcommand(1);

  sfdde::cli::RunOptions options;
  options.threads = sfdde::default_thread_count();
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "run one experiment config");
  run->add_option("config", options.config, "experiment config (YAML)")->required();
  run->add_option("--out", options.out_dir, "output directory (default $SFDDE_OUT_DIR or ./sfdde-out)");
  auto* seed_opt = run->add_option("--seed", seed, "master seed, overrides noise.seed");
  run->add_option("--threads", options.threads, "worker threads")->check(CLI::PositiveNumber);
  run->add_option("--set", options.overrides, "key=value override, dotted keys")->take_all();

  std::string to_check;
  auto* validate = app.add_subcommand("validate", "list every problem in a config");
  validate->add_option("config", to_check, "experiment config (YAML)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*validate) return sfdde::cli::validate(to_check, std::cout);

  if (options.out_dir.empty()) options.out_dir = sfdde::cli::default_out_dir();
  if (*seed_opt) options.seed = seed;
  return sfdde::cli::run(options, std::cerr).exit_code;
}
