#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace sfdde::cli {

struct RunOptions {
  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::vector<std::string> overrides;
};

struct SummaryLine {
  bool pass = false;
  std::string name;
  std::string detail;
};

struct RunResult {
  int exit_code = 0;
  std::vector<SummaryLine> summary;
  std::vector<std::string> artifacts;  // file names inside out_dir
};

/// Exit codes: 0 run completed (summary may hold FAIL lines), 1 numerical
/// failure, 2 configuration error. Messages go to `log`.
RunResult run(const RunOptions& options, std::ostream& log);

/// Lists every diagnostic; returns 0 iff there are none, 2 otherwise.
int validate(const std::string& config, std::ostream& out);

/// Executes one experiment into out_dir without manifest bookkeeping.
RunResult execute(const ExperimentConfig& config, const std::string& out_dir, int threads,
                  const std::string& config_hash);

/// SHA-1 of "blob <size>\0" + content, as git computes object ids.
std::string git_blob_sha1(const std::string& content);

/// $SFDDE_OUT_DIR when set, else ./sfdde-out.
std::string default_out_dir();

}  // namespace sfdde::cli
