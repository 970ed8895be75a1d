#include "envdeg/metrics.hpp"

#include "envdeg/error.hpp"
#include "envdeg/parallel.hpp"
#include "envdeg/prediction.hpp"
#include "envdeg/random.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace envdeg {

std::string_view to_string(ErrorMode mode) noexcept {
  return mode == ErrorMode::relative ? "relative" : "absolute";
}

ErrorMode parse_error_mode(std::string_view text) {
  if (text == "relative") return ErrorMode::relative;
  if (text == "absolute") return ErrorMode::absolute;
  throw Error(ErrorCode::InvalidArgument, "unknown error mode '" + std::string(text) + "'");
}

double prediction_error(double predicted_rl, double true_rl, ErrorMode mode) {
  if (!(true_rl > 0.0)) throw Error(ErrorCode::InvalidTruth, "true residual life must be positive");
  const double diff = predicted_rl - true_rl;
  return mode == ErrorMode::relative ? (diff / true_rl) * (diff / true_rl) : diff * diff;
}

PercentileErrorTable evaluate_cohort(const ResidualLifePredictor& predictor,
                                     const std::vector<DegradationSignal>& signals,
                                     const std::vector<double>& lifetimes, const std::vector<double>& percentiles,
                                     ErrorMode mode, std::string method_tag) {
  if (signals.size() != lifetimes.size()) throw Error(ErrorCode::LengthMismatch, "one lifetime per unit required");
  if (signals.empty() || percentiles.empty()) throw Error(ErrorCode::InsufficientData, "nothing to evaluate");
  for (double p : percentiles) {
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidArgument, "percentiles must lie in (0, 1)");
  }
  for (double life : lifetimes) {
    if (!(life > 0.0)) throw Error(ErrorCode::InvalidTruth, "lifetimes must be positive");
  }

  const auto U = signals.size();
  const auto P = percentiles.size();
  PercentileErrorTable table;
  table.method_tag = std::move(method_tag);
  table.percentiles = percentiles;
  table.per_unit_errors.resize(static_cast<Eigen::Index>(U), static_cast<Eigen::Index>(P));
  for (const auto& s : signals) table.unit_ids.push_back(s.unit_id);

  parallel_for(U * P, [&](std::size_t cell) {
    const std::size_t u = cell / P, j = cell % P;
    const double cut = percentiles[j] * lifetimes[u];
    const DegradationSignal partial = truncate_at(signals[u], cut);
    const double predicted = predictor(partial, cut, u, j);
    table.per_unit_errors(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(j)) =
        prediction_error(predicted, lifetimes[u] - cut, mode);
  });

  table.mean_errors = table.per_unit_errors.colwise().mean().transpose();
  table.var_errors.resize(static_cast<Eigen::Index>(P));
  for (std::size_t j = 0; j < P; ++j) {
    const auto col = table.per_unit_errors.col(static_cast<Eigen::Index>(j));
    const double mean = table.mean_errors[static_cast<Eigen::Index>(j)];
    table.var_errors[static_cast<Eigen::Index>(j)] =
        U > 1 ? (col.array() - mean).square().sum() / static_cast<double>(U - 1) : 0.0;
  }
  return table;
}

PercentileErrorTable evaluate_cohort(const ModelParams& params, const std::vector<DegradationSignal>& signals,
                                     const std::vector<double>& lifetimes, const EvaluationOptions& options) {
  std::atomic<std::size_t> fallbacks{0};
  const std::size_t P = options.percentiles.size();
  auto predictor = [&](const DegradationSignal& partial, double horizon, std::size_t unit, std::size_t pct) {
    const GammaPosterior post = partial.empty() ? prior_posterior(params, options.threshold, horizon)
                                                : gamma_posterior(params, partial, options.threshold, horizon);
    const std::uint64_t cell_seed = mix64(options.seed ^ mix64(static_cast<std::uint64_t>(unit * P + pct)));
    const RldSamples samples = sample_rld(post, params.basis, options.n_b, cell_seed, options.crossing_grid_size);
    try {
      return rld_point_prediction(samples);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AllCensored) throw;
      ++fallbacks;
      return params.basis.domain_end - horizon;
    }
  };
  PercentileErrorTable table =
      evaluate_cohort(predictor, signals, lifetimes, options.percentiles, options.mode, options.method_tag);
  table.n_all_censored = fallbacks.load();
  return table;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void write_error_tables_csv(const std::vector<PercentileErrorTable>& tables, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "method,statistic";
  if (!tables.empty()) {
    for (double p : tables.front().percentiles) out << ',' << fmt(p);
  }
  out << '\n';
  for (const auto& t : tables) {
    out << t.method_tag << ",mean";
    for (Eigen::Index j = 0; j < t.mean_errors.size(); ++j) out << ',' << fmt(t.mean_errors[j]);
    out << '\n' << t.method_tag << ",var";
    for (Eigen::Index j = 0; j < t.var_errors.size(); ++j) out << ',' << fmt(t.var_errors[j]);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void write_unit_errors_csv(const std::vector<PercentileErrorTable>& tables, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "method,unit_id,percentile,error\n";
  for (const auto& t : tables) {
    for (Eigen::Index u = 0; u < t.per_unit_errors.rows(); ++u) {
      for (Eigen::Index j = 0; j < t.per_unit_errors.cols(); ++j) {
        out << t.method_tag << ',' << t.unit_ids[static_cast<std::size_t>(u)] << ','
            << fmt(t.percentiles[static_cast<std::size_t>(j)]) << ',' << fmt(t.per_unit_errors(u, j)) << '\n';
      }
    }
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace envdeg
