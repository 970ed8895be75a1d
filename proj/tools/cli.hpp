#pragma once

#include "envdeg/error.hpp"
#include "envdeg/estimation.hpp"
#include "envdeg/metrics.hpp"
#include "envdeg/signal.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace envdeg::cli {

enum class Command { simulate, fit, predict, evaluate, tune };

std::string_view to_string(Command command) noexcept;

struct RunConfig {
  Command command = Command::simulate;
  std::filesystem::path input;
  std::filesystem::path output;
  std::filesystem::path model;
  std::filesystem::path truth;
  Scenario scenario = Scenario::clustering;
  int K = 2;
  int q = 8;
  ShrinkageParams shrink{0.5, 0.1};
  int n_b = 2000;
  std::uint64_t seed = 0;
  std::optional<double> threshold;
  std::optional<double> domain_end;
  SamplingMode mode = SamplingMode::complete;
  ErrorMode error = ErrorMode::relative;
  std::vector<double> percentiles = default_percentiles;
  int n_units = 100;
  // tune only
  std::vector<int> q_list{8};
  std::vector<int> k_list{2};
  std::vector<double> lambda_list{0.5};
  std::vector<double> zeta_list{0.1};
  int folds = 5;
};

nlohmann::json to_json(const RunConfig& config);

inline constexpr int exit_usage = 2;
inline constexpr int exit_unexpected = 1;

/// 10 + the error code, so every module error maps to its own status.
int exit_code(ErrorCode code) noexcept;

/// Checks the paths and required values for the command. Throws Error.
void validate(const RunConfig& config);

/// Executes one command. Diagnostics go to `log`; returns the exit status.
int run(const RunConfig& config, std::ostream& log);

/// Argument parsing plus run(); the executable is a thin wrapper around this.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Sidecar path carrying the run configuration of an artifact.
std::filesystem::path meta_path(const std::filesystem::path& artifact);

/// `dir/stem<suffix>` for an artifact path, e.g. ("run/m.json", ".report.json").
std::filesystem::path sibling(const std::filesystem::path& artifact, const std::string& suffix);

}  // namespace envdeg::cli
