#pragma once

#include "envdeg/estimation.hpp"
#include "envdeg/metrics.hpp"
#include "envdeg/signal.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace envdeg {

struct TuningGrid {
  std::vector<int> q_candidates{5};
  std::vector<int> k_candidates{2};  // ignored for classification (K comes from labels)
  std::vector<double> lambda_candidates{0.5};
  std::vector<double> zeta_candidates{0.1};
  int folds = 5;
  std::vector<double> eval_percentiles = default_percentiles;
  ShrinkageParams default_shrink{0.5, 0.1};
  double threshold = 0.0;
  double domain_end = 0.0;
  int n_b = 500;
  int crossing_grid_size = 801;
  ErrorMode error_mode = ErrorMode::relative;
  FitOptions fit_options{};
};

struct CvCell {
  int q = 0;
  int K = 0;
  double lambda = 0.0;
  double zeta = 0.0;
  int fold = -1;  // -1 marks the across-fold mean
  double mean_error = 0.0;
  int step = 1;
};

struct TuningResult {
  int q = 0;
  int K = 0;
  double lambda = 0.0;
  double zeta = 0.0;
  std::vector<CvCell> cv_table;
};

/// Signal-level fold assignment: fold index per unit, balanced and seeded.
std::vector<int> assign_folds(std::size_t n_units, int folds, std::uint64_t seed);

/// Two-step grid search: (q, K) under default_shrink, then (lambda, zeta) at
/// the selected (q, K). Ties prefer smaller q then smaller K in step one and
/// larger zeta then larger lambda in step two.
TuningResult cross_validate(const std::vector<DegradationSignal>& signals, const std::vector<double>& lifetimes,
                            const TuningGrid& grid, Scenario scenario, std::uint64_t seed);

/// q,K,lambda,zeta,fold,mean_error ("all" in the fold column for fold means).
void write_cv_table_csv(const std::vector<CvCell>& table, const std::filesystem::path& path);

}  // namespace envdeg
