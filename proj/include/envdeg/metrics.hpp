#pragma once

#include "envdeg/estimation.hpp"
#include "envdeg/signal.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace envdeg {

enum class ErrorMode { relative, absolute };

std::string_view to_string(ErrorMode mode) noexcept;
ErrorMode parse_error_mode(std::string_view text);

/// relative: ((predicted - truth) / truth)^2; absolute: (predicted - truth)^2.
double prediction_error(double predicted_rl, double true_rl, ErrorMode mode = ErrorMode::relative);

inline const std::vector<double> default_percentiles{0.1, 0.3, 0.5, 0.7, 0.9};

struct PercentileErrorTable {
  std::string method_tag;
  std::vector<double> percentiles;
  std::vector<std::string> unit_ids;
  Eigen::MatrixXd per_unit_errors;  // units x percentiles
  Eigen::VectorXd mean_errors;
  Eigen::VectorXd var_errors;       // sample variance (n - 1)
  std::size_t n_all_censored = 0;   // predictions that fell back to M - t*
};

/// Predicts the residual life of `partial`, a unit known to be alive at
/// `horizon`. `unit` and `percentile` index the evaluation cell.
using ResidualLifePredictor =
    std::function<double(const DegradationSignal& partial, double horizon, std::size_t unit, std::size_t percentile)>;

/// Scores `predictor` on every unit truncated at each percentile p of its
/// lifetime, against the true residual life (1 - p) * lifetime.
PercentileErrorTable evaluate_cohort(const ResidualLifePredictor& predictor,
                                     const std::vector<DegradationSignal>& signals,
                                     const std::vector<double>& lifetimes, const std::vector<double>& percentiles,
                                     ErrorMode mode = ErrorMode::relative, std::string method_tag = {});

struct EvaluationOptions {
  double threshold = 0.0;
  std::vector<double> percentiles = default_percentiles;
  int n_b = 2000;
  std::uint64_t seed = 0;
  int crossing_grid_size = 801;
  ErrorMode mode = ErrorMode::relative;
  std::string method_tag;
};

/// Posterior-mean bootstrap prediction for every (unit, percentile) cell.
/// Units with no observations before the cut use the prior mixture; cells where
/// every bootstrap path is censored predict M - t* and are counted.
PercentileErrorTable evaluate_cohort(const ModelParams& params, const std::vector<DegradationSignal>& signals,
                                     const std::vector<double>& lifetimes, const EvaluationOptions& options);

/// Wide CSV: method,statistic,<p1>,<p2>,... with one mean and one var row per table.
void write_error_tables_csv(const std::vector<PercentileErrorTable>& tables, const std::filesystem::path& path);

/// Long CSV for boxplots: method,unit_id,percentile,error.
void write_unit_errors_csv(const std::vector<PercentileErrorTable>& tables, const std::filesystem::path& path);

}  // namespace envdeg
