#include "envdeg/prediction.hpp"

#include "envdeg/error.hpp"
#include "envdeg/random.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace envdeg {

std::size_t RldSamples::n_censored() const noexcept {
  return static_cast<std::size_t>(std::count(censored.begin(), censored.end(), true));
}

namespace {

void require_observations(const ModelParams& params, const DegradationSignal& partial) {
  validate_signal(partial);
  if (partial.times.front() < 0.0 || partial.times.back() > params.basis.domain_end) {
    throw Error(ErrorCode::OutOfDomain, "unit " + partial.unit_id + " has observations outside [0, M]");
  }
}

// Sampling factor F with F F^T = cov; tolerates singular (PSD) matrices.
Eigen::MatrixXd sampling_factor(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (cov + cov.transpose()));
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

}  // namespace

Eigen::VectorXd cluster_posterior(const ModelParams& params, const DegradationSignal& partial) {
  require_observations(params, partial);
  const SignalDesign d = make_design(params.basis, partial);
  const auto priors = component_priors(params);
  Eigen::VectorXd log_w(params.K());
  for (int k = 0; k < params.K(); ++k) {
    log_w[k] = std::log(params.pi[k]) + priors[static_cast<std::size_t>(k)].condition(d).log_density;
  }
  const double norm = log_sum_exp(log_w);
  Eigen::VectorXd w = (log_w.array() - norm).unaryExpr([](double x) { return std::exp(x); });
  return w / w.sum();
}

GammaPosterior gamma_posterior(const ModelParams& params, const DegradationSignal& partial, double threshold,
                               std::optional<double> horizon) {
  require_observations(params, partial);
  const SignalDesign d = make_design(params.basis, partial);
  const auto priors = component_priors(params);
  GammaPosterior post;
  post.threshold = threshold;
  post.t_star = partial.times.back();
  if (horizon) {
    if (*horizon < post.t_star) throw Error(ErrorCode::InvalidArgument, "horizon precedes the last observation");
    post.t_star = *horizon;
  }
  Eigen::VectorXd log_w(params.K());
  for (int k = 0; k < params.K(); ++k) {
    auto r = priors[static_cast<std::size_t>(k)].condition(d);
    log_w[k] = std::log(params.pi[k]) + r.log_density;
    post.means.push_back(std::move(r.posterior.mean));
    post.covariances.push_back(std::move(r.posterior.cov));
  }
  const double norm = log_sum_exp(log_w);
  post.weights = (log_w.array() - norm).unaryExpr([](double x) { return std::exp(x); });
  post.weights /= post.weights.sum();
  return post;
}

GammaPosterior prior_posterior(const ModelParams& params, double threshold, double t_star) {
  GammaPosterior post;
  post.weights = params.pi;
  post.means = params.mu;
  post.covariances = params.lambda;
  post.t_star = t_star;
  post.threshold = threshold;
  return post;
}

RldSamples sample_rld(const GammaPosterior& posterior, const BasisSpec& basis, int n_b, std::uint64_t seed,
                      int crossing_grid_size) {
  if (n_b < 1) throw Error(ErrorCode::InvalidArgument, "n_b must be >= 1");
  if (crossing_grid_size < 2) throw Error(ErrorCode::InvalidArgument, "crossing grid needs >= 2 points");
  const double M = basis.domain_end;
  if (!(posterior.t_star < M)) throw Error(ErrorCode::InvalidArgument, "t_star must precede the domain end");
  const auto K = static_cast<std::size_t>(posterior.weights.size());

  std::vector<Eigen::MatrixXd> factors;
  factors.reserve(K);
  for (const auto& c : posterior.covariances) factors.push_back(sampling_factor(c));
  std::vector<double> cumulative(K);
  double acc = 0.0;
  for (std::size_t k = 0; k < K; ++k) cumulative[k] = (acc += posterior.weights[static_cast<Eigen::Index>(k)]);

  const auto G = static_cast<std::size_t>(crossing_grid_size);
  std::vector<double> grid(G);
  std::vector<BasisRow> rows(G);
  for (std::size_t i = 0; i < G; ++i) {
    grid[i] = i + 1 == G ? M : M * static_cast<double>(i) / static_cast<double>(G - 1);
    rows[i] = eval_basis_local(basis, grid[i]);
  }

  RldSamples out;
  out.draws.resize(static_cast<std::size_t>(n_b));
  out.censored.resize(static_cast<std::size_t>(n_b));
  const std::size_t max_rejected = 1000 * static_cast<std::size_t>(n_b);
  const auto q = basis.q;
  Eigen::VectorXd z(q), gamma(q);

  for (int b = 0; b < n_b; ++b) {
    auto rng = substream(seed, static_cast<std::uint64_t>(b));
    for (;;) {
      const double u = uniform01(rng) * acc;
      std::size_t k = 0;
      while (k + 1 < K && u >= cumulative[k]) ++k;
      for (int j = 0; j < q; ++j) z[j] = standard_normal(rng);
      gamma.noalias() = posterior.means[k] + factors[k] * z;

      std::size_t hit = G;
      for (std::size_t i = 0; i < G; ++i) {
        const BasisRow& r = rows[i];
        double s = 0.0;
        for (int j = 0; j < BasisSpec::order; ++j) s += r.values[j] * gamma[r.first + j];
        if (s > posterior.threshold) {
          hit = i;
          break;
        }
      }
      const auto slot = static_cast<std::size_t>(b);
      if (hit == G) {
        out.draws[slot] = M - posterior.t_star;
        out.censored[slot] = true;
        break;
      }
      const double rl = grid[hit] - posterior.t_star;
      if (rl > 0.0) {
        out.draws[slot] = rl;
        out.censored[slot] = false;
        break;
      }
      if (++out.n_rejected > max_rejected) {
        throw Error(ErrorCode::RejectionOverflow,
                    "sampled paths keep crossing the threshold before t* = " + std::to_string(posterior.t_star));
      }
    }
  }
  return out;
}

namespace {

std::vector<double> uncensored(const RldSamples& samples) {
  std::vector<double> out;
  out.reserve(samples.draws.size());
  for (std::size_t i = 0; i < samples.draws.size(); ++i) {
    if (!samples.censored[i]) out.push_back(samples.draws[i]);
  }
  if (out.empty()) throw Error(ErrorCode::AllCensored, "every bootstrap path stayed below the threshold");
  return out;
}

}  // namespace

double rld_point_prediction(const RldSamples& samples) {
  const auto kept = uncensored(samples);
  double sum = 0.0;
  for (double d : kept) sum += d;
  return sum / static_cast<double>(kept.size());
}

std::vector<double> rld_quantiles(const RldSamples& samples, std::span<const double> probs) {
  auto kept = uncensored(samples);
  std::sort(kept.begin(), kept.end());
  std::vector<double> out;
  out.reserve(probs.size());
  const auto n = static_cast<double>(kept.size());
  for (double p : probs) {
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidArgument, "quantile probabilities must lie in (0, 1)");
    const auto rank = static_cast<std::size_t>(std::max(1.0, std::ceil(p * n - 1e-12)));
    out.push_back(kept[std::min(rank, kept.size()) - 1]);
  }
  return out;
}

UnitPrediction predict_unit(const ModelParams& params, const DegradationSignal& partial,
                            const PredictionOptions& options, std::optional<double> horizon) {
  const GammaPosterior post = partial.empty() && horizon
                                  ? prior_posterior(params, options.threshold, *horizon)
                                  : gamma_posterior(params, partial, options.threshold, horizon);
  const RldSamples samples = sample_rld(post, params.basis, options.n_b, options.seed, options.crossing_grid_size);
  UnitPrediction out;
  out.unit_id = partial.unit_id;
  out.t_star = post.t_star;
  out.weights = post.weights;
  out.point_rl = rld_point_prediction(samples);
  const auto q = rld_quantiles(samples, options.quantile_probs);
  for (std::size_t i = 0; i < q.size(); ++i) out.quantiles.emplace_back(options.quantile_probs[i], q[i]);
  out.n_censored = samples.n_censored();
  out.n_rejected = samples.n_rejected;
  return out;
}

nlohmann::json to_json(const UnitPrediction& p) {
  nlohmann::json doc;
  doc["unit_id"] = p.unit_id;
  doc["t_star"] = p.t_star;
  doc["weights"] = std::vector<double>(p.weights.data(), p.weights.data() + p.weights.size());
  doc["point_rl"] = p.point_rl;
  nlohmann::json q = nlohmann::json::object();
  for (const auto& [prob, value] : p.quantiles) {
    char key[32];
    std::snprintf(key, sizeof key, "%g", prob);
    q[key] = value;
  }
  doc["quantiles"] = std::move(q);
  doc["n_censored"] = p.n_censored;
  doc["n_rejected"] = p.n_rejected;
  return doc;
}

}  // namespace envdeg
