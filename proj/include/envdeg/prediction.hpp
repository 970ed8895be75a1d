#pragma once

#include "envdeg/basis.hpp"
#include "envdeg/estimation.hpp"
#include "envdeg/signal.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace envdeg {

/// Mixture-of-Gaussians posterior of the basis coefficients of a fielded unit.
struct GammaPosterior {
  Eigen::VectorXd weights;  // P(Z* = k | S*)
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;
  double t_star = 0.0;
  double threshold = 0.0;
};

/// Bootstrap residual-life draws. Censored draws (no crossing by M) hold
/// M - t_star.
struct RldSamples {
  std::vector<double> draws;
  std::vector<bool> censored;
  std::size_t n_rejected = 0;

  std::size_t n_censored() const noexcept;
};

/// P(Z* = k | S*) by Bayes' rule on the cluster marginals, in log space.
Eigen::VectorXd cluster_posterior(const ModelParams& params, const DegradationSignal& partial);

/// Posterior of gamma given a partial signal. t_star defaults to the last
/// observation time; `horizon` overrides it when the unit is known to have
/// survived past its last observation.
GammaPosterior gamma_posterior(const ModelParams& params, const DegradationSignal& partial, double threshold,
                               std::optional<double> horizon = std::nullopt);

/// Posterior for a unit with no observations yet: the fitted prior mixture.
GammaPosterior prior_posterior(const ModelParams& params, double threshold, double t_star);

RldSamples sample_rld(const GammaPosterior& posterior, const BasisSpec& basis, int n_b, std::uint64_t seed,
                      int crossing_grid_size = 801);

/// Mean of the non-censored draws.
double rld_point_prediction(const RldSamples& samples);

/// Nearest-rank quantiles of the non-censored draws.
std::vector<double> rld_quantiles(const RldSamples& samples, std::span<const double> probs);

struct PredictionOptions {
  double threshold = 0.0;
  int n_b = 2000;
  std::uint64_t seed = 0;
  int crossing_grid_size = 801;
  std::vector<double> quantile_probs{0.05, 0.5, 0.95};
};

struct UnitPrediction {
  std::string unit_id;
  double t_star = 0.0;
  Eigen::VectorXd weights;
  double point_rl = 0.0;
  std::vector<std::pair<double, double>> quantiles;
  std::size_t n_censored = 0;
  std::size_t n_rejected = 0;
};

/// Full pipeline for one unit: posterior, bootstrap and summaries.
UnitPrediction predict_unit(const ModelParams& params, const DegradationSignal& partial,
                            const PredictionOptions& options, std::optional<double> horizon = std::nullopt);

nlohmann::json to_json(const UnitPrediction& prediction);

}  // namespace envdeg
