#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace envdeg {

/// One unit's observed degradation path.
struct DegradationSignal {
  std::string unit_id;
  std::vector<double> times;   // strictly increasing
  std::vector<double> values;  // same length as times
  std::optional<int> env_label;  // 1..K when the environment is known
  bool truncated = false;        // observation stopped at the threshold crossing

  std::size_t size() const noexcept { return times.size(); }
  bool empty() const noexcept { return times.empty(); }
};

/// Throws InvalidArgument unless times are strictly increasing and the two
/// vectors have equal length.
void validate_signal(const DegradationSignal& signal, bool allow_empty = false);

/// Observations with time <= horizon.
DegradationSignal truncate_at(const DegradationSignal& signal, double horizon);

/// Largest absolute amplitude across a collection; 0 for empty input.
double max_abs_amplitude(const std::vector<DegradationSignal>& signals);

enum class SamplingMode { complete, sparse };

/// Two-environment simulation study.
///
/// Environment 1: S(t) = 4 t^2 exp(t / 25) + beta t^2 + eps, beta ~ N(0, beta_sd^2).
/// Environment 2: S(t) = B(t) gamma + eps with a clamped cubic basis of
/// dimension cluster2_q on [0, domain_end] and gamma ~ N(cluster2_mean,
/// precision_scale * cluster2_precision^{-1}).
struct SimConfig {
  double threshold = 1000.0;
  double domain_end = 20.0;
  int grid_points = 81;
  int sparse_count = 12;
  SamplingMode mode = SamplingMode::complete;
  std::array<double, 2> cluster_probs{0.5, 0.5};
  std::array<double, 2> noise_sd{60.0, 80.0};
  double beta_sd = 1.5;
  int cluster2_q = 5;
  Eigen::VectorXd cluster2_mean = default_cluster2_mean();
  Eigen::MatrixXd cluster2_precision = default_cluster2_precision();
  double precision_scale = 5600.0;
  std::uint64_t seed = 0;

  static Eigen::VectorXd default_cluster2_mean();
  /// Second-difference random-walk precision (tridiagonal 2/-1, last diagonal 1).
  static Eigen::MatrixXd default_cluster2_precision();

  std::vector<double> grid() const;
};

struct Cohort {
  std::vector<DegradationSignal> signals;
  std::vector<double> lifetimes;  // first full-grid time with S >= D
};

/// Mean trend of environment 1.
double cluster1_mean(double t);

Cohort simulate_cohort(const SimConfig& config, int n_units);

/// Ground truth sidecar: unit_id,lifetime,env.
struct TruthRecord {
  std::string unit_id;
  double lifetime = 0.0;
  std::optional<int> env_label;
};

/// CSV with header unit_id,time,value,env. The truncation flag is not part of
/// the format; when `threshold` is given a unit is marked truncated if its last
/// value reaches it.
std::vector<DegradationSignal> read_signals_csv(const std::filesystem::path& path,
                                                std::optional<double> threshold = std::nullopt);
void write_signals_csv(const std::vector<DegradationSignal>& signals, const std::filesystem::path& path);

std::vector<TruthRecord> read_truth_csv(const std::filesystem::path& path);
void write_truth_csv(const std::vector<TruthRecord>& truth, const std::filesystem::path& path);
std::vector<TruthRecord> truth_records(const Cohort& cohort);

/// Lifetimes aligned with `signals` by unit_id; InvalidTruth when a unit is missing.
std::vector<double> align_lifetimes(const std::vector<DegradationSignal>& signals,
                                    const std::vector<TruthRecord>& truth);

}  // namespace envdeg
