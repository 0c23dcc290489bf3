#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "sfdde/calculus.hpp"
#include "sfdde/feynman_kac.hpp"
#include "sfdde/functionals.hpp"

namespace sfdde::cli {

struct Diagnostic {
  std::string key;
  int line = 0;  // 1-based, 0 when unknown
  std::string message;
};

std::string to_string(const Diagnostic& d);

enum class Family { Simulate, Robustness, ItoCheck, Picard, Fk, NoiseInfo };

const char* family_name(Family family);

struct Assertions {
  std::optional<double> slope_min, slope_max;
  bool decreasing = false;
  std::optional<double> forms_agree;   // max |integral form - jump form|
  std::optional<double> max_residual;  // max |residual| over the profile
  std::optional<double> factorial_slope;
  double factorial_tolerance = 0.15;
  std::optional<int> gaps_decreasing_from;
  std::optional<double> expected;      // fk closed form
  double z = 2.5758;                   // normal multiplier for the fk interval
  bool flow_exact = false;
  bool variance_preserved = false;
};

struct ExperimentConfig {
  YAML::Node tree;  // effective tree after overrides
  SfddeModel model;
  SegmentBuffer eta;
  double dt = 0.0;
  double horizon = 0.0;
  double eps_ref = 0.0;
  std::uint64_t seed = 1;

  Family family = Family::Simulate;
  std::size_t paths = 1;
  double p = 2.0;
  std::vector<double> eps_list;
  int kmax = 10;
  int fit_first = 2;
  int fit_last = 8;
  std::optional<TestFunctional> functional;
  double check_t = 0.0;
  TerminalPayoff payoff;
  double fk_t = 0.0;
  std::optional<std::pair<double, double>> flow;
  std::vector<double> info_eps;
  std::optional<double> variance_eps;
  std::size_t variance_samples = 100000;
  Assertions asserts;
};

/// Parses a file into a tree; throws sfdde::Error(InvalidArgument) with the
/// parser's line on malformed input and when the file is missing.
YAML::Node load_tree(const std::string& path);

/// Applies key=value overrides along dotted paths (numeric parts index lists).
void apply_overrides(YAML::Node& tree, const std::vector<std::string>& overrides, std::vector<Diagnostic>& out);

/// Reads and checks the whole tree, collecting every problem found.
std::optional<ExperimentConfig> build_config(const YAML::Node& tree, std::vector<Diagnostic>& out);

}  // namespace sfdde::cli
