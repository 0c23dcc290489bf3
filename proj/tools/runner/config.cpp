#include "config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "sfdde/error.hpp"
#include "sfdde/robustness.hpp"

namespace sfdde::cli {

std::string to_string(const Diagnostic& d) {
  std::ostringstream out;
  if (d.line > 0) out << "line " << d.line << ": ";
  out << d.key << ": " << d.message;
  return out.str();
}

const char* family_name(Family family) {
  switch (family) {
    case Family::Simulate: return "simulate";
    case Family::Robustness: return "robustness";
    case Family::ItoCheck: return "ito-check";
    case Family::Picard: return "picard";
    case Family::Fk: return "fk";
    case Family::NoiseInfo: return "noise-info";
  }
  return "?";
}

YAML::Node load_tree(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open config file " + path);
  try {
    return YAML::Load(in);
  } catch (const YAML::ParserException& e) {
    throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
}

namespace {

std::vector<std::string> split_path(const std::string& key) {
  std::vector<std::string> parts;
  std::stringstream in(key);
  std::string part;
  while (std::getline(in, part, '.')) parts.push_back(part);
  return parts;
}

bool is_index(const std::string& s) {
  return !s.empty() && s.find_first_not_of("0123456789") == std::string::npos;
}

}  // namespace

void apply_overrides(YAML::Node& tree, const std::vector<std::string>& overrides, std::vector<Diagnostic>& out) {
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      out.push_back({item, 0, "override must have the form key=value"});
      continue;
    }
    const std::string key = item.substr(0, eq);
    YAML::Node value;
    try {
      value = YAML::Load(item.substr(eq + 1));
    } catch (const YAML::Exception& e) {
      out.push_back({key, 0, "override value does not parse: " + e.msg});
      continue;
    }
    const auto parts = split_path(key);
    YAML::Node cur = tree;
    bool ok = true;
    for (std::size_t i = 0; i + 1 < parts.size() && ok; ++i) {
      YAML::Node next;
      if (cur.IsSequence() && is_index(parts[i])) {
        const std::size_t idx = std::stoul(parts[i]);
        if (idx >= cur.size()) ok = false;
        else next = cur[idx];
      } else if (cur.IsMap() || cur.IsNull()) {
        next = cur[parts[i]];
      } else {
        ok = false;
      }
      if (ok) cur.reset(next);
    }
    if (!ok) {
      out.push_back({key, 0, "override path does not name a config entry"});
      continue;
    }
    if (cur.IsSequence() && is_index(parts.back())) {
      const std::size_t idx = std::stoul(parts.back());
      if (idx >= cur.size()) {
        out.push_back({key, 0, "override index is past the end of the list"});
        continue;
      }
      cur[idx] = value;
    } else {
      cur[parts.back()] = value;
    }
  }
}

namespace {

int line_of(const YAML::Node& node) {
  if (!node.IsDefined()) return 0;
  const auto mark = node.Mark();
  return mark.line >= 0 ? mark.line + 1 : 0;
}

bool on_grid(double x, double dt) {
  const double q = x / dt;
  return std::abs(q - std::round(q)) <= 1e-9 * std::max(1.0, std::abs(q));
}

std::string show(double x) {
  std::ostringstream s;
  s << x;
  return s.str();
}

// Collects diagnostics while reading typed values out of the tree.
class Reader {
 public:
  explicit Reader(std::vector<Diagnostic>& out) : out_(out) {}

  void fail(const YAML::Node& at, const std::string& key, const std::string& message) {
    out_.push_back({key, line_of(at), message});
  }
  std::size_t count() const { return out_.size(); }

  YAML::Node child(const YAML::Node& parent, const std::string& name) {
    if (!parent.IsDefined() || !parent.IsMap()) return YAML::Node(YAML::NodeType::Undefined);
    const YAML::Node found = parent[name];
    return found.IsDefined() ? found : YAML::Node(YAML::NodeType::Undefined);
  }

  void known_keys(const YAML::Node& node, const std::string& key, std::initializer_list<const char*> allowed) {
    if (!node.IsDefined() || !node.IsMap()) return;
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : node) {
      const auto name = kv.first.as<std::string>();
      if (!ok.count(name)) fail(kv.first, join(key, name), "unknown key");
    }
  }

  bool map(const YAML::Node& parent, const std::string& name, const std::string& key, YAML::Node& out,
           bool required = true) {
    out.reset(child(parent, name));
    if (!out.IsDefined() || out.IsNull()) {
      if (required) fail(parent, key, "missing section");
      return false;
    }
    if (!out.IsMap()) {
      fail(out, key, "expected a mapping");
      return false;
    }
    return true;
  }

  std::optional<double> number(const YAML::Node& parent, const std::string& name, const std::string& key,
                               std::optional<double> fallback = std::nullopt) {
    const YAML::Node node = child(parent, name);
    if (!node.IsDefined() || node.IsNull()) {
      if (!fallback) fail(parent, key, "missing value");
      return fallback;
    }
    return as_number(node, key);
  }

  std::optional<double> as_number(const YAML::Node& node, const std::string& key) {
    if (node.IsScalar()) {
      try {
        const double x = node.as<double>();
        if (std::isfinite(x)) return x;
      } catch (const YAML::Exception&) {
      }
    }
    fail(node, key, "expected a finite number");
    return std::nullopt;
  }

  std::optional<long long> integer(const YAML::Node& parent, const std::string& name, const std::string& key,
                                   std::optional<long long> fallback = std::nullopt, long long min = 0) {
    const YAML::Node node = child(parent, name);
    if (!node.IsDefined() || node.IsNull()) {
      if (!fallback) fail(parent, key, "missing value");
      return fallback;
    }
    if (node.IsScalar()) {
      try {
        const auto v = node.as<long long>();
        if (v < min) {
          fail(node, key, "must be at least " + std::to_string(min));
          return std::nullopt;
        }
        return v;
      } catch (const YAML::Exception&) {
      }
    }
    fail(node, key, "expected an integer");
    return std::nullopt;
  }

  std::optional<std::string> word(const YAML::Node& parent, const std::string& name, const std::string& key,
                                  std::initializer_list<const char*> choices, std::optional<std::string> fallback = {}) {
    const YAML::Node node = child(parent, name);
    if (!node.IsDefined() || node.IsNull()) {
      if (!fallback) fail(parent, key, "missing value");
      return fallback;
    }
    if (node.IsScalar()) {
      const auto s = node.as<std::string>();
      for (const char* c : choices) {
        if (s == c) return s;
      }
    }
    std::string list;
    for (const char* c : choices) list += (list.empty() ? "" : ", ") + std::string(c);
    fail(node, key, "expected one of: " + list);
    return std::nullopt;
  }

  std::optional<std::vector<double>> numbers(const YAML::Node& parent, const std::string& name,
                                             const std::string& key, bool required = true) {
    const YAML::Node node = child(parent, name);
    if (!node.IsDefined() || node.IsNull()) {
      if (required) fail(parent, key, "missing list");
      return std::nullopt;
    }
    if (node.IsScalar()) {
      auto x = as_number(node, key);
      if (!x) return std::nullopt;
      return std::vector<double>{*x};
    }
    if (!node.IsSequence()) {
      fail(node, key, "expected a list of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    bool ok = true;
    for (std::size_t i = 0; i < node.size(); ++i) {
      auto x = as_number(node[i], key + "[" + std::to_string(i) + "]");
      if (x) out.push_back(*x);
      else ok = false;
    }
    if (!ok) return std::nullopt;
    return out;
  }

  // scalar (broadcast), flat list (column when cols == 1, row when rows == 1) or list of rows
  std::optional<Eigen::MatrixXd> matrix(const YAML::Node& node, const std::string& key, int rows, int cols) {
    Eigen::MatrixXd out(rows, cols);
    if (node.IsScalar()) {
      auto x = as_number(node, key);
      if (!x) return std::nullopt;
      out.setConstant(*x);
      return out;
    }
    if (!node.IsSequence()) {
      fail(node, key, "expected a number or a matrix");
      return std::nullopt;
    }
    const bool flat = node.size() > 0 && node[0].IsScalar();
    if (flat) {
      if ((cols == 1 && static_cast<int>(node.size()) == rows) || (rows == 1 && static_cast<int>(node.size()) == cols)) {
        for (std::size_t i = 0; i < node.size(); ++i) {
          auto x = as_number(node[i], key);
          if (!x) return std::nullopt;
          out(cols == 1 ? static_cast<int>(i) : 0, cols == 1 ? 0 : static_cast<int>(i)) = *x;
        }
        return out;
      }
    } else if (static_cast<int>(node.size()) == rows) {
      for (int i = 0; i < rows; ++i) {
        const YAML::Node row = node[static_cast<std::size_t>(i)];
        if (!row.IsSequence() || static_cast<int>(row.size()) != cols) {
          fail(row, key, "row " + std::to_string(i) + " must hold " + std::to_string(cols) + " numbers");
          return std::nullopt;
        }
        for (int j = 0; j < cols; ++j) {
          auto x = as_number(row[static_cast<std::size_t>(j)], key);
          if (!x) return std::nullopt;
          out(i, j) = *x;
        }
      }
      return out;
    }
    fail(node, key, "expected a " + std::to_string(rows) + "x" + std::to_string(cols) + " matrix");
    return std::nullopt;
  }

  std::optional<Eigen::VectorXd> vector(const YAML::Node& parent, const std::string& name, const std::string& key,
                                        int dim) {
    const YAML::Node node = child(parent, name);
    if (!node.IsDefined() || node.IsNull()) {
      fail(parent, key, "missing vector");
      return std::nullopt;
    }
    auto m = matrix(node, key, dim, 1);
    if (!m) return std::nullopt;
    return Eigen::VectorXd(m->col(0));
  }

  static std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }
  static std::string item(const std::string& a, std::size_t i) { return a + "[" + std::to_string(i) + "]"; }

 private:
  std::vector<Diagnostic>& out_;
};

using DensityFn = std::function<double(double)>;

// {kind: constant, c} | {kind: exponential, c, a} | {kind: linear, a, b}
std::optional<DensityFn> density_fn(Reader& rd, const YAML::Node& node, const std::string& key) {
  rd.known_keys(node, key, {"kind", "c", "a", "b"});
  const auto kind = rd.word(node, "kind", key + ".kind", {"constant", "exponential", "linear"});
  if (!kind) return std::nullopt;
  if (*kind == "constant") {
    auto c = rd.number(node, "c", key + ".c");
    if (!c) return std::nullopt;
    return DensityFn([c = *c](double) { return c; });
  }
  if (*kind == "exponential") {
    auto c = rd.number(node, "c", key + ".c", 1.0);
    auto a = rd.number(node, "a", key + ".a");
    if (!c || !a) return std::nullopt;
    return DensityFn([c = *c, a = *a](double th) { return c * std::exp(a * th); });
  }
  auto a = rd.number(node, "a", key + ".a");
  auto b = rd.number(node, "b", key + ".b", 0.0);
  if (!a || !b) return std::nullopt;
  return DensityFn([a = *a, b = *b](double th) { return a + b * th; });
}

std::optional<Distributed> distributed(Reader& rd, const YAML::Node& node, const std::string& key) {
  Distributed out;
  bool ok = true;
  const YAML::Node atoms = rd.child(node, "atoms");
  if (atoms.IsDefined() && !atoms.IsNull()) {
    if (!atoms.IsSequence()) {
      rd.fail(atoms, key + ".atoms", "expected a list of [theta, weight] pairs");
      ok = false;
    } else {
      for (std::size_t i = 0; i < atoms.size(); ++i) {
        const auto k = Reader::item(key + ".atoms", i);
        auto pair = rd.matrix(atoms[i], k, 1, 2);
        if (!pair) {
          ok = false;
          continue;
        }
        out.atoms.emplace_back((*pair)(0, 0), (*pair)(0, 1));
      }
    }
  }
  YAML::Node dens;
  if (rd.map(node, "density", key + ".density", dens, false)) {
    auto fn = density_fn(rd, dens, key + ".density");
    if (fn) out.density = *fn;
    else ok = false;
  }
  if (!ok) return std::nullopt;
  return out;
}

std::optional<DelayKernel> kernel(Reader& rd, const YAML::Node& node, const std::string& key) {
  if (!node.IsMap()) {
    rd.fail(node, key, "expected a mapping");
    return std::nullopt;
  }
  rd.known_keys(node, key, {"type", "tau", "atoms", "density", "component"});
  const auto type =
      rd.word(node, "type", key + ".type", {"discrete", "distributed", "brownian_delay", "levy_delay", "mean_field"});
  if (!type) return std::nullopt;
  if (*type == "discrete") {
    auto tau = rd.number(node, "tau", key + ".tau");
    if (!tau) return std::nullopt;
    return DelayKernel(Discrete{*tau});
  }
  if (*type == "distributed" || *type == "mean_field") {
    auto alpha = distributed(rd, node, key);
    if (!alpha) return std::nullopt;
    if (*type == "mean_field") return DelayKernel(MeanField{std::move(*alpha)});
    return DelayKernel(std::move(*alpha));
  }
  auto c = rd.integer(node, "component", key + ".component", 0);
  if (!c) return std::nullopt;
  if (*type == "brownian_delay") return DelayKernel(BrownianDelay{static_cast<int>(*c)});
  return DelayKernel(LevyDelay{static_cast<int>(*c)});
}

std::optional<AffineForm> form(Reader& rd, const YAML::Node& parent, const std::string& name, const std::string& key,
                               int rows, int cols) {
  AffineForm out = AffineForm::zero(rows, cols);
  const YAML::Node node = rd.child(parent, name);
  if (!node.IsDefined() || node.IsNull()) return out;
  if (!node.IsMap()) {
    rd.fail(node, key, "expected a mapping with constant and terms");
    return std::nullopt;
  }
  rd.known_keys(node, key, {"constant", "terms"});
  bool ok = true;
  const YAML::Node constant = rd.child(node, "constant");
  if (constant.IsDefined() && !constant.IsNull()) {
    auto c = rd.matrix(constant, key + ".constant", rows, cols);
    if (c) out.constant = *c;
    else ok = false;
  }
  const YAML::Node terms = rd.child(node, "terms");
  if (terms.IsDefined() && !terms.IsNull()) {
    if (!terms.IsSequence()) {
      rd.fail(terms, key + ".terms", "expected a list");
      return std::nullopt;
    }
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const auto k = Reader::item(key + ".terms", i);
      const YAML::Node t = terms[i];
      rd.known_keys(t, k, {"coefficient", "source", "kernel", "component", "transform"});
      const YAML::Node coef = rd.child(t, "coefficient");
      std::optional<Eigen::MatrixXd> c;
      if (!coef.IsDefined()) rd.fail(t, k + ".coefficient", "missing value");
      else c = rd.matrix(coef, k + ".coefficient", rows, cols);
      const auto source = rd.word(t, "source", k + ".source", {"present", "kernel", "time"});
      const auto transform =
          rd.word(t, "transform", k + ".transform", {"identity", "sin", "cos", "tanh", "exp"}, "identity");
      const auto kernel_index = rd.integer(t, "kernel", k + ".kernel", 0);
      const auto component = rd.integer(t, "component", k + ".component", 0);
      if (!c || !source || !transform || !kernel_index || !component) {
        ok = false;
        continue;
      }
      Feature f;
      f.source = *source == "present" ? Feature::Source::Present
                 : *source == "kernel" ? Feature::Source::Kernel
                                       : Feature::Source::Time;
      f.kernel = static_cast<int>(*kernel_index);
      f.component = static_cast<int>(*component);
      f.transform = *transform == "identity" ? Feature::Transform::Identity
                    : *transform == "sin"    ? Feature::Transform::Sin
                    : *transform == "cos"    ? Feature::Transform::Cos
                    : *transform == "tanh"   ? Feature::Transform::Tanh
                                             : Feature::Transform::Exp;
      out.terms.emplace_back(*c, f);
    }
  }
  if (!ok) return std::nullopt;
  return out;
}

std::optional<LevyMeasure> measure(Reader& rd, const YAML::Node& node, const std::string& key) {
  if (!node.IsMap()) {
    rd.fail(node, key, "expected a mapping");
    return std::nullopt;
  }
  rd.known_keys(node, key, {"type", "alpha", "c", "beta", "atoms", "rate", "mean"});
  const auto type = rd.word(node, "type", key + ".type", {"tempered_stable", "atoms", "exponential"});
  if (!type) return std::nullopt;
  try {
    if (*type == "tempered_stable") {
      auto alpha = rd.number(node, "alpha", key + ".alpha");
      auto c = rd.number(node, "c", key + ".c", 1.0);
      auto beta = rd.number(node, "beta", key + ".beta", 1.0);
      if (!alpha || !c || !beta) return std::nullopt;
      return LevyMeasure::tempered_stable(*alpha, *c, *beta);
    }
    if (*type == "exponential") {
      // one-sided jumps of mean `mean` arriving at `rate`
      auto rate = rd.number(node, "rate", key + ".rate");
      auto mean = rd.number(node, "mean", key + ".mean");
      if (!rate || !mean) return std::nullopt;
      if (*mean <= 0.0) {
        rd.fail(node, key + ".mean", "must be positive");
        return std::nullopt;
      }
      return LevyMeasure::density([rate = *rate, mean = *mean](double z) { return rate * std::exp(-z / mean) / mean; },
                                  0.0, std::numeric_limits<double>::infinity());
    }
    const YAML::Node atoms = rd.child(node, "atoms");
    if (!atoms.IsSequence()) {
      rd.fail(node, key + ".atoms", "expected a list of [position, mass] pairs");
      return std::nullopt;
    }
    std::vector<std::pair<double, double>> list;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      auto pair = rd.matrix(atoms[i], Reader::item(key + ".atoms", i), 1, 2);
      if (!pair) return std::nullopt;
      list.emplace_back((*pair)(0, 0), (*pair)(0, 1));
    }
    return LevyMeasure::atoms(std::move(list));
  } catch (const Error& e) {
    rd.fail(node, key, e.what());
    return std::nullopt;
  }
}

std::optional<JumpScaling> scaling(Reader& rd, const YAML::Node& node, const std::string& key, int k, int n) {
  rd.known_keys(node, key, {"kind", "scale", "bound"});
  const auto kind = rd.word(node, "kind", key + ".kind", {"linear", "tanh", "clipped"}, "linear");
  const auto scale = rd.number(node, "scale", key + ".scale", 1.0);
  if (!kind || !scale) return std::nullopt;
  const double c = *scale;
  if (*kind == "linear") return JumpScaling::uniform(k, n, [c](double z) { return c * z; });
  if (*kind == "tanh") return JumpScaling::uniform(k, n, [c](double z) { return c * std::tanh(z); });
  const auto bound = rd.number(node, "bound", key + ".bound");
  if (!bound) return std::nullopt;
  return JumpScaling::uniform(k, n, [c, b = *bound](double z) { return std::abs(z) <= b ? c * z : 0.0; });
}

std::optional<std::function<Eigen::VectorXd(double)>> initial(Reader& rd, const YAML::Node& node,
                                                              const std::string& key, int d) {
  rd.known_keys(node, key, {"kind", "value", "slope", "amplitude", "frequency"});
  const auto kind = rd.word(node, "kind", key + ".kind", {"constant", "affine", "sine"}, "constant");
  if (!kind) return std::nullopt;
  const auto value = rd.vector(node, "value", key + ".value", d);
  if (!value) return std::nullopt;
  if (*kind == "constant") {
    return std::function<Eigen::VectorXd(double)>([v = *value](double) { return v; });
  }
  if (*kind == "affine") {
    auto slope = rd.vector(node, "slope", key + ".slope", d);
    if (!slope) return std::nullopt;
    return std::function<Eigen::VectorXd(double)>(
        [v = *value, s = *slope](double th) { return Eigen::VectorXd(v + th * s); });
  }
  auto amp = rd.vector(node, "amplitude", key + ".amplitude", d);
  auto freq = rd.number(node, "frequency", key + ".frequency", 1.0);
  if (!amp || !freq) return std::nullopt;
  return std::function<Eigen::VectorXd(double)>(
      [v = *value, a = *amp, w = *freq](double th) { return Eigen::VectorXd(v + std::sin(w * th) * a); });
}

std::optional<TestFunctional> functional(Reader& rd, const YAML::Node& node, const std::string& key, int d) {
  rd.known_keys(node, key, {"kind", "v", "weight"});
  const auto kind = rd.word(node, "kind", key + ".kind", {"linear", "quadratic", "integral"});
  if (!kind) return std::nullopt;
  if (*kind == "integral") {
    YAML::Node w;
    if (!rd.map(node, "weight", key + ".weight", w)) return std::nullopt;
    rd.known_keys(w, key + ".weight", {"c", "a"});
    auto c = rd.vector(w, "c", key + ".weight.c", d);
    auto a = rd.number(w, "a", key + ".weight.a", 0.0);
    if (!c || !a) return std::nullopt;
    return TestFunctional::integral(WeightFn::exponential(*c, *a));
  }
  auto v = rd.vector(node, "v", key + ".v", d);
  if (!v) return std::nullopt;
  return *kind == "linear" ? TestFunctional::linear(*v) : TestFunctional::quadratic(*v);
}

std::optional<TerminalPayoff> payoff(Reader& rd, const YAML::Node& node, const std::string& key, int d) {
  rd.known_keys(node, key, {"kind", "v", "strike", "atoms", "density"});
  const auto kind = rd.word(node, "kind", key + ".kind", {"linear", "quadratic", "distributed", "call"});
  auto v = rd.vector(node, "v", key + ".v", d);
  if (!kind || !v) return std::nullopt;
  if (*kind == "linear") return TerminalPayoff::linear(*v);
  if (*kind == "quadratic") return TerminalPayoff::quadratic(*v);
  if (*kind == "call") {
    auto strike = rd.number(node, "strike", key + ".strike");
    if (!strike) return std::nullopt;
    return TerminalPayoff::call(*v, *strike);
  }
  auto alpha = distributed(rd, node, key);
  if (!alpha) return std::nullopt;
  return TerminalPayoff::distributed(*v, std::move(*alpha));
}

void read_assertions(Reader& rd, const YAML::Node& node, Assertions& a) {
  const std::string key = "experiment.assert";
  rd.known_keys(node, key,
                {"slope_min", "slope_max", "decreasing", "forms_agree", "max_residual", "factorial_slope",
                 "factorial_tolerance", "gaps_decreasing_from", "expected", "z", "flow_exact", "variance_preserved"});
  auto opt = [&](const char* name) -> std::optional<double> {
    const YAML::Node n = rd.child(node, name);
    if (!n.IsDefined() || n.IsNull()) return std::nullopt;
    return rd.as_number(n, Reader::join(key, name));
  };
  auto flag = [&](const char* name) {
    const YAML::Node n = rd.child(node, name);
    if (!n.IsDefined() || n.IsNull()) return false;
    try {
      return n.as<bool>();
    } catch (const YAML::Exception&) {
      rd.fail(n, Reader::join(key, name), "expected true or false");
      return false;
    }
  };
  a.slope_min = opt("slope_min");
  a.slope_max = opt("slope_max");
  a.decreasing = flag("decreasing");
  a.forms_agree = opt("forms_agree");
  a.max_residual = opt("max_residual");
  a.factorial_slope = opt("factorial_slope");
  if (auto t = opt("factorial_tolerance")) a.factorial_tolerance = *t;
  if (auto k = rd.integer(node, "gaps_decreasing_from", key + ".gaps_decreasing_from", -1, -1); k && *k >= 0) {
    a.gaps_decreasing_from = static_cast<int>(*k);
  }
  a.expected = opt("expected");
  if (auto z = opt("z")) a.z = *z;
  a.flow_exact = flag("flow_exact");
  a.variance_preserved = flag("variance_preserved");
}

}  // namespace

std::optional<ExperimentConfig> build_config(const YAML::Node& tree, std::vector<Diagnostic>& out) {
  Reader rd(out);
  const std::size_t before = rd.count();
  ExperimentConfig cfg;
  cfg.tree = tree;
  if (!tree.IsMap()) {
    rd.fail(tree, "config", "top level must be a mapping with model, grid, noise and experiment");
    return std::nullopt;
  }
  rd.known_keys(tree, "", {"model", "grid", "noise", "experiment"});

  YAML::Node model, grid, noise, exp;
  const bool has_model = rd.map(tree, "model", "model", model);
  const bool has_grid = rd.map(tree, "grid", "grid", grid);
  const bool has_noise = rd.map(tree, "noise", "noise", noise);
  const bool has_exp = rd.map(tree, "experiment", "experiment", exp);

  // grid
  std::optional<double> dt, horizon;
  if (has_grid) {
    rd.known_keys(grid, "grid", {"dt", "T"});
    dt = rd.number(grid, "dt", "grid.dt");
    horizon = rd.number(grid, "T", "grid.T");
    if (dt && *dt <= 0.0) {
      rd.fail(rd.child(grid, "dt"), "grid.dt", "must be positive");
      dt.reset();
    }
    if (horizon && *horizon <= 0.0) {
      rd.fail(rd.child(grid, "T"), "grid.T", "must be positive");
      horizon.reset();
    }
    if (dt && horizon && !on_grid(*horizon, *dt)) {
      rd.fail(rd.child(grid, "T"), "grid.T", "grid.T = " + show(*horizon) + " is not a multiple of grid.dt = " + show(*dt));
    }
  }
  auto grid_time = [&](const YAML::Node& at, const std::string& key, double t) {
    if (!dt) return;
    if (!on_grid(t, *dt)) rd.fail(at, key, key + " = " + show(t) + " is not a multiple of grid.dt = " + show(*dt));
    if (horizon && (t < 0.0 || t > *horizon + 1e-12)) rd.fail(at, key, key + " = " + show(t) + " lies outside [0, grid.T]");
  };

  // noise
  if (has_noise) {
    rd.known_keys(noise, "noise", {"eps_ref", "seed"});
    if (auto e = rd.number(noise, "eps_ref", "noise.eps_ref", 0.0)) {
      if (*e < 0.0) rd.fail(rd.child(noise, "eps_ref"), "noise.eps_ref", "must be non-negative");
      cfg.eps_ref = *e;
    }
    const YAML::Node seed = rd.child(noise, "seed");
    if (seed.IsDefined() && !seed.IsNull()) {
      try {
        cfg.seed = seed.as<std::uint64_t>();
      } catch (const YAML::Exception&) {
        rd.fail(seed, "noise.seed", "expected an unsigned 64-bit integer");
      }
    }
  }

  // model
  std::function<Eigen::VectorXd(double)> eta_fn;
  if (has_model) {
    rd.known_keys(model, "model", {"d", "m", "n", "k", "r", "mode", "p", "lipschitz", "growth", "kernels", "f", "g",
                                   "h0", "measures", "lambda", "initial"});
    auto& M = cfg.model;
    const auto d = rd.integer(model, "d", "model.d", 1, 1);
    const auto m = rd.integer(model, "m", "model.m", 1, 1);
    const auto n = rd.integer(model, "n", "model.n", 0, 0);
    const auto k = rd.integer(model, "k", "model.k", 1, 1);
    const auto r = rd.number(model, "r", "model.r");
    const auto mode = rd.word(model, "mode", "model.mode", {"cadlag", "mp"}, "cadlag");
    const auto p = rd.number(model, "p", "model.p", 2.0);
    M.lipschitz = rd.number(model, "lipschitz", "model.lipschitz", 0.0).value_or(0.0);
    M.growth = rd.number(model, "growth", "model.growth", 0.0).value_or(0.0);
    if (r && *r <= 0.0) rd.fail(rd.child(model, "r"), "model.r", "must be positive");
    if (p && *p < 2.0) rd.fail(rd.child(model, "p"), "model.p", "must be at least 2");
    if (r && dt && *r > 0.0 && !on_grid(*r, *dt)) {
      rd.fail(rd.child(grid, "dt"), "grid.dt", "grid.dt = " + show(*dt) + " does not divide model.r = " + show(*r));
    }
    if (d && m && n && k && r && mode && p) {
      M.d = static_cast<int>(*d);
      M.m = static_cast<int>(*m);
      M.n = static_cast<int>(*n);
      M.k = static_cast<int>(*k);
      M.delay = *r;
      M.mode = *mode == "mp" ? EvalMode::Mp : EvalMode::Cadlag;
      M.p = *p;
      const YAML::Node kernels = rd.child(model, "kernels");
      if (kernels.IsDefined() && !kernels.IsNull()) {
        if (!kernels.IsSequence()) {
          rd.fail(kernels, "model.kernels", "expected a list");
        } else {
          for (std::size_t i = 0; i < kernels.size(); ++i) {
            if (auto kern = kernel(rd, kernels[i], Reader::item("model.kernels", i))) M.kernels.push_back(*kern);
          }
        }
      }
      if (auto f = form(rd, model, "f", "model.f", M.d, 1)) M.f = *f;
      if (auto g = form(rd, model, "g", "model.g", M.d, M.m)) M.g = *g;
      if (auto h = form(rd, model, "h0", "model.h0", M.d, M.k)) M.h0 = *h;
      const YAML::Node measures = rd.child(model, "measures");
      if (M.n > 0) {
        if (!measures.IsSequence() || static_cast<int>(measures.size()) != M.n) {
          rd.fail(measures.IsDefined() ? measures : model, "model.measures",
                  "expected a list of model.n = " + std::to_string(M.n) + " measures");
        } else {
          for (std::size_t j = 0; j < measures.size(); ++j) {
            if (auto mu = measure(rd, measures[j], Reader::item("model.measures", j))) M.nu.push_back(*mu);
          }
        }
        YAML::Node lam;
        if (rd.map(model, "lambda", "model.lambda", lam)) {
          if (auto s = scaling(rd, lam, "model.lambda", M.k, M.n)) M.scaling = *s;
        }
      } else if (measures.IsDefined() && !measures.IsNull() && measures.size() > 0) {
        rd.fail(measures, "model.measures", "measures given but model.n = 0");
      }
      YAML::Node init;
      if (rd.map(model, "initial", "model.initial", init)) {
        if (auto fn = initial(rd, init, "model.initial", M.d)) eta_fn = *fn;
      }
    }
  }

  // experiment
  if (has_exp) {
    rd.known_keys(exp, "experiment", {"family", "N", "p", "eps_list", "kmax", "fit_first", "fit_last", "functional",
                                      "t", "payoff", "t1", "t2", "eps", "variance", "assert"});
    const auto family = rd.word(exp, "family", "experiment.family",
                                {"simulate", "robustness", "ito-check", "picard", "fk", "noise-info"});
    if (family) {
      const std::string& f = *family;
      cfg.family = f == "simulate"     ? Family::Simulate
                   : f == "robustness" ? Family::Robustness
                   : f == "ito-check"  ? Family::ItoCheck
                   : f == "picard"     ? Family::Picard
                   : f == "fk"         ? Family::Fk
                                       : Family::NoiseInfo;
      const long long default_n = cfg.family == Family::Simulate || cfg.family == Family::ItoCheck ? 1 : 1000;
      if (auto N = rd.integer(exp, "N", "experiment.N", default_n, 1)) cfg.paths = static_cast<std::size_t>(*N);
      if (auto p = rd.number(exp, "p", "experiment.p", cfg.model.p)) {
        if (*p < 1.0) rd.fail(rd.child(exp, "p"), "experiment.p", "must be at least 1");
        cfg.p = *p;
      }
      const int d = cfg.model.d;
      switch (cfg.family) {
        case Family::Simulate:
          break;
        case Family::Robustness: {
          if (auto list = rd.numbers(exp, "eps_list", "experiment.eps_list")) {
            cfg.eps_list = *list;
            const YAML::Node node = rd.child(exp, "eps_list");
            if (list->empty()) rd.fail(node, "experiment.eps_list", "must not be empty");
            for (std::size_t i = 0; i < list->size(); ++i) {
              const double e = (*list)[i];
              if (e <= cfg.eps_ref) {
                rd.fail(node, Reader::item("experiment.eps_list", i),
                        "eps = " + show(e) + " must exceed noise.eps_ref = " + show(cfg.eps_ref) +
                            " (the robustness sweep compares X^eps against the reference truncated at eps_ref)");
              }
              if (i > 0 && e >= (*list)[i - 1]) {
                rd.fail(node, Reader::item("experiment.eps_list", i), "eps_list must be strictly decreasing");
              }
            }
          }
          break;
        }
        case Family::ItoCheck: {
          YAML::Node fn;
          if (rd.map(exp, "functional", "experiment.functional", fn)) cfg.functional = functional(rd, fn, "experiment.functional", d);
          if (auto t = rd.number(exp, "t", "experiment.t", horizon.value_or(0.0))) {
            cfg.check_t = *t;
            grid_time(rd.child(exp, "t"), "experiment.t", *t);
          }
          break;
        }
        case Family::Picard: {
          if (auto kmax = rd.integer(exp, "kmax", "experiment.kmax", 10, 1)) cfg.kmax = static_cast<int>(*kmax);
          if (auto a = rd.integer(exp, "fit_first", "experiment.fit_first", 2, 1)) cfg.fit_first = static_cast<int>(*a);
          if (auto b = rd.integer(exp, "fit_last", "experiment.fit_last", 8, 1)) cfg.fit_last = static_cast<int>(*b);
          if (cfg.fit_last <= cfg.fit_first) {
            rd.fail(rd.child(exp, "fit_last"), "experiment.fit_last", "must exceed experiment.fit_first");
          }
          break;
        }
        case Family::Fk: {
          YAML::Node pay;
          if (rd.map(exp, "payoff", "experiment.payoff", pay)) {
            if (auto po = payoff(rd, pay, "experiment.payoff", d)) cfg.payoff = *po;
          }
          if (auto t = rd.number(exp, "t", "experiment.t", 0.0)) {
            cfg.fk_t = *t;
            grid_time(rd.child(exp, "t"), "experiment.t", *t);
          }
          const YAML::Node t1n = rd.child(exp, "t1"), t2n = rd.child(exp, "t2");
          if (t1n.IsDefined() != t2n.IsDefined()) {
            rd.fail(exp, "experiment.t1", "t1 and t2 must be given together");
          } else if (t1n.IsDefined()) {
            auto t1 = rd.as_number(t1n, "experiment.t1");
            auto t2 = rd.as_number(t2n, "experiment.t2");
            if (t1 && t2) {
              grid_time(t1n, "experiment.t1", *t1);
              grid_time(t2n, "experiment.t2", *t2);
              if (*t1 > *t2) rd.fail(t1n, "experiment.t1", "must not exceed experiment.t2");
              cfg.flow = std::make_pair(*t1, *t2);
            }
          }
          break;
        }
        case Family::NoiseInfo: {
          if (auto list = rd.numbers(exp, "eps", "experiment.eps")) {
            cfg.info_eps = *list;
            for (std::size_t i = 0; i < list->size(); ++i) {
              if ((*list)[i] <= 0.0) rd.fail(rd.child(exp, "eps"), Reader::item("experiment.eps", i), "must be positive");
            }
          }
          YAML::Node var;
          if (rd.map(exp, "variance", "experiment.variance", var, false)) {
            rd.known_keys(var, "experiment.variance", {"eps", "samples"});
            auto e = rd.number(var, "eps", "experiment.variance.eps");
            auto s = rd.integer(var, "samples", "experiment.variance.samples", 100000, 2);
            if (e && *e <= cfg.eps_ref) {
              rd.fail(rd.child(var, "eps"), "experiment.variance.eps", "must exceed noise.eps_ref = " + show(cfg.eps_ref));
            }
            if (e && s) {
              cfg.variance_eps = *e;
              cfg.variance_samples = static_cast<std::size_t>(*s);
            }
          }
          break;
        }
      }
      YAML::Node asserts;
      if (rd.map(exp, "assert", "experiment.assert", asserts, false)) read_assertions(rd, asserts, cfg.asserts);
    }
  }

  if (rd.count() != before || !dt || !horizon || !eta_fn) {
    if (rd.count() == before) rd.fail(tree, "config", "incomplete configuration");
    return std::nullopt;
  }
  cfg.dt = *dt;
  cfg.horizon = *horizon;

  // checks that need the assembled model
  try {
    cfg.model.validate(cfg.dt);
  } catch (const Error& e) {
    rd.fail(model, "model", e.what());
  }
  if (cfg.model.n > 0) {
    try {
      const NoiseGenerator probe(cfg.model, cfg.horizon, cfg.dt, cfg.eps_ref);
    } catch (const Error& e) {
      rd.fail(rd.child(noise, "eps_ref"), "noise.eps_ref", e.what());
    }
  }
  if (rd.count() != before) return std::nullopt;
  cfg.eta = SegmentBuffer::sample(cfg.model.d, cfg.model.delay, cfg.dt, eta_fn);
  return cfg;
}

}  // namespace sfdde::cli
