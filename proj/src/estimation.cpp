#include "envdeg/estimation.hpp"

#include "envdeg/error.hpp"
#include "envdeg/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

namespace envdeg {

std::string_view to_string(Scenario scenario) noexcept {
  return scenario == Scenario::classification ? "classification" : "clustering";
}

Scenario parse_scenario(std::string_view text) {
  if (text == "classification") return Scenario::classification;
  if (text == "clustering") return Scenario::clustering;
  throw Error(ErrorCode::InvalidArgument, "unknown scenario '" + std::string(text) + "'");
}

void ModelParams::validate() const {
  const int k = K();
  const int dim = basis.q;
  if (k < 1) throw Error(ErrorCode::InvalidConfig, "model needs at least one cluster");
  if (static_cast<int>(mu.size()) != k || static_cast<int>(lambda.size()) != k || sigma.size() != k) {
    throw Error(ErrorCode::InvalidConfig, "parameter vectors disagree on K");
  }
  if ((pi.array() < 0.0).any() || std::abs(pi.sum() - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidConfig, "pi must be a probability vector");
  }
  for (int c = 0; c < k; ++c) {
    if (mu[c].size() != dim || lambda[c].rows() != dim || lambda[c].cols() != dim) {
      throw Error(ErrorCode::InvalidConfig, "cluster " + std::to_string(c + 1) + " has wrong dimension");
    }
    if (!(sigma[c] > 0.0)) throw Error(ErrorCode::InvalidConfig, "sigma must be positive");
    if ((lambda[c] - lambda[c].transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + lambda[c].cwiseAbs().maxCoeff())) {
      throw Error(ErrorCode::InvalidConfig, "Lambda must be symmetric");
    }
    if (Eigen::LLT<Eigen::MatrixXd>(lambda[c]).info() != Eigen::Success) {
      throw Error(ErrorCode::InvalidConfig, "Lambda must be positive definite");
    }
  }
}

SignalDesign make_design(const BasisSpec& basis, const DegradationSignal& signal) {
  SignalDesign d;
  d.b = design_matrix(basis, signal.times);
  d.s = Eigen::Map<const Eigen::VectorXd>(signal.values.data(), static_cast<Eigen::Index>(signal.values.size()));
  d.gram = d.b.transpose() * d.b;
  d.bts = d.b.transpose() * d.s;
  return d;
}

namespace {

double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

constexpr double log_two_pi = 1.8378770664093454835606594728112;

}  // namespace

ComponentPrior::ComponentPrior(const Eigen::VectorXd& mu, const Eigen::MatrixXd& lambda, double sigma)
    : mu_(mu), sigma2_(sigma * sigma) {
  Eigen::LLT<Eigen::MatrixXd> llt(lambda);
  if (llt.info() != Eigen::Success || !(sigma > 0.0)) {
    throw Error(ErrorCode::SingularCovariance, "coefficient covariance is not positive definite");
  }
  lambda_inv_ = llt.solve(Eigen::MatrixXd::Identity(lambda.rows(), lambda.cols()));
  lambda_inv_ = 0.5 * (lambda_inv_ + lambda_inv_.transpose());
  lambda_inv_mu_ = lambda_inv_ * mu_;
  log_det_lambda_ = log_det_from_llt(llt);
}

ComponentPrior::Result ComponentPrior::condition(const SignalDesign& design) const {
  const auto q = mu_.size();
  const Eigen::MatrixXd precision = lambda_inv_ + design.gram / sigma2_;
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularCovariance, "posterior precision is not positive definite");
  }
  Result out;
  out.posterior.cov = llt.solve(Eigen::MatrixXd::Identity(q, q));
  out.posterior.cov = 0.5 * (out.posterior.cov + out.posterior.cov.transpose());
  out.posterior.mean = llt.solve(lambda_inv_mu_ + design.bts / sigma2_);

  // (S - B mu)^T C^{-1} (S - B mu) split at the posterior mean.
  const Eigen::VectorXd residual = design.s - design.b * out.posterior.mean;
  const Eigen::VectorXd shift = out.posterior.mean - mu_;
  const double quad = residual.squaredNorm() / sigma2_ + shift.dot(lambda_inv_ * shift);
  const auto n = static_cast<double>(design.n());
  const double log_det_c = n * std::log(sigma2_) + log_det_lambda_ + log_det_from_llt(llt);
  out.log_density = -0.5 * (n * log_two_pi + log_det_c + quad);
  return out;
}

std::vector<ComponentPrior> component_priors(const ModelParams& params) {
  std::vector<ComponentPrior> out;
  out.reserve(static_cast<std::size_t>(params.K()));
  for (int k = 0; k < params.K(); ++k) out.emplace_back(params.mu[k], params.lambda[k], params.sigma[k]);
  return out;
}

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).unaryExpr([](double x) { return std::exp(x); }).sum());
}

namespace {

EStepResult e_step_designs(const ModelParams& params, const std::vector<SignalDesign>& designs) {
  const auto priors = component_priors(params);
  const int K = params.K();
  const auto L = static_cast<Eigen::Index>(designs.size());
  EStepResult out;
  out.responsibilities.resize(L, K);
  out.log_joint.resize(L, K);
  out.moments.assign(designs.size(), std::vector<GammaMoments>(static_cast<std::size_t>(K)));
  out.loglik = 0.0;
  for (Eigen::Index l = 0; l < L; ++l) {
    for (int k = 0; k < K; ++k) {
      auto r = priors[static_cast<std::size_t>(k)].condition(designs[static_cast<std::size_t>(l)]);
      out.log_joint(l, k) = std::log(params.pi[k]) + r.log_density;
      out.moments[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)] = std::move(r.posterior);
    }
    const Eigen::VectorXd row = out.log_joint.row(l).transpose();
    const double norm = log_sum_exp(row);
    if (!std::isfinite(norm)) {
      throw Error(ErrorCode::SingularCovariance, "signal has zero likelihood under every cluster");
    }
    out.responsibilities.row(l) = (row.array() - norm).unaryExpr([](double x) { return std::exp(x); }).matrix().transpose();
    out.responsibilities.row(l) /= out.responsibilities.row(l).sum();
    out.loglik += norm;
  }
  return out;
}

void make_positive_definite(Eigen::MatrixXd& m) {
  m = 0.5 * (m + m.transpose());
  if (Eigen::LLT<Eigen::MatrixXd>(m).info() == Eigen::Success) return;
  const double scale = std::max(m.trace() / static_cast<double>(m.rows()), std::numeric_limits<double>::min());
  double jitter = 1e-12 * scale;
  for (int attempt = 0; attempt < 40; ++attempt, jitter *= 10.0) {
    Eigen::MatrixXd candidate = m;
    candidate.diagonal().array() += jitter;
    if (Eigen::LLT<Eigen::MatrixXd>(candidate).info() == Eigen::Success) {
      m = std::move(candidate);
      return;
    }
  }
  throw Error(ErrorCode::SingularCovariance, "covariance estimate cannot be made positive definite");
}

double sigma_floor_for(const std::vector<DegradationSignal>& signals) {
  return std::max(1e-8 * max_abs_amplitude(signals), 1e-150);
}

ModelParams m_step_designs(const BasisSpec& basis, const std::vector<SignalDesign>& designs,
                           const Eigen::MatrixXd& resp, const std::vector<std::vector<GammaMoments>>& moments,
                           const ShrinkageParams& shrink, double sigma_floor) {
  const auto L = static_cast<Eigen::Index>(designs.size());
  const int K = static_cast<int>(resp.cols());
  const int q = basis.q;
  if (resp.rows() != L || static_cast<Eigen::Index>(moments.size()) != L) {
    throw Error(ErrorCode::LengthMismatch, "responsibilities/moments do not match the signals");
  }

  ModelParams out;
  out.basis = basis;
  out.pi.resize(K);
  out.sigma.resize(K);
  out.mu.assign(static_cast<std::size_t>(K), Eigen::VectorXd::Zero(q));
  std::vector<Eigen::MatrixXd> raw(static_cast<std::size_t>(K), Eigen::MatrixXd::Zero(q, q));
  Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(q, q);

  for (int k = 0; k < K; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    double weight = 0.0;
    for (Eigen::Index l = 0; l < L; ++l) weight += resp(l, k);
    if (!(weight >= 1e-8)) {
      throw Error(ErrorCode::EmptyCluster, "cluster " + std::to_string(k + 1) + " has no responsibility mass");
    }
    out.pi[k] = weight / static_cast<double>(L);

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(q);
    for (Eigen::Index l = 0; l < L; ++l) mean += resp(l, k) * moments[static_cast<std::size_t>(l)][kk].mean;
    mean /= weight;

    double sse = 0.0;
    double n_eff = 0.0;
    for (Eigen::Index l = 0; l < L; ++l) {
      const double r = resp(l, k);
      if (r == 0.0) continue;
      const auto& mom = moments[static_cast<std::size_t>(l)][kk];
      const auto& d = designs[static_cast<std::size_t>(l)];
      const Eigen::VectorXd dev = mom.mean - mean;
      raw[kk].noalias() += r * (mom.cov + dev * dev.transpose());
      sse += r * ((d.s - d.b * mom.mean).squaredNorm() + (mom.cov * d.gram).trace());
      n_eff += r * static_cast<double>(d.n());
    }
    raw[kk] /= weight;
    raw[kk] = 0.5 * (raw[kk] + raw[kk].transpose());
    pooled += weight * raw[kk];
    out.mu[kk] = std::move(mean);
    out.sigma[k] = n_eff > 0.0 ? std::max(std::sqrt(sse / n_eff), sigma_floor) : sigma_floor;
  }
  pooled /= static_cast<double>(L);
  out.pi /= out.pi.sum();

  out.lambda = shrink_covariance(raw, pooled, shrink);
  for (auto& m : out.lambda) make_positive_definite(m);
  return out;
}

std::vector<SignalDesign> designs_for(const BasisSpec& basis, const std::vector<DegradationSignal>& signals) {
  std::vector<SignalDesign> out;
  out.reserve(signals.size());
  for (const auto& s : signals) {
    validate_signal(s);
    out.push_back(make_design(basis, s));
  }
  return out;
}

Eigen::VectorXd ridge_fit(const SignalDesign& d, int q) {
  const double ridge = 1e-6 * d.gram.trace() / static_cast<double>(q);
  Eigen::MatrixXd a = d.gram;
  a.diagonal().array() += std::max(ridge, std::numeric_limits<double>::min());
  return a.ldlt().solve(d.bts);
}

// Starting parameters from a hard partition: moments of the per-signal ridge
// coefficients, shrunk enough to be well conditioned.
ModelParams init_from_partition(const BasisSpec& basis, const std::vector<SignalDesign>& designs,
                                const std::vector<Eigen::VectorXd>& coefs, std::span<const int> assignment, int K,
                                const ShrinkageParams& shrink, double sigma_floor) {
  const int q = basis.q;
  const auto L = designs.size();
  ModelParams p;
  p.basis = basis;
  p.pi = Eigen::VectorXd::Zero(K);
  p.sigma.resize(K);
  p.mu.assign(static_cast<std::size_t>(K), Eigen::VectorXd::Zero(q));
  std::vector<Eigen::MatrixXd> raw(static_cast<std::size_t>(K), Eigen::MatrixXd::Zero(q, q));
  std::vector<double> rss(static_cast<std::size_t>(K), 0.0), dof(static_cast<std::size_t>(K), 0.0);
  double all_rss = 0.0, all_dof = 0.0;

  for (std::size_t l = 0; l < L; ++l) {
    const auto k = static_cast<std::size_t>(assignment[l]);
    p.pi[assignment[l]] += 1.0;
    p.mu[k] += coefs[l];
    const double r = (designs[l].s - designs[l].b * coefs[l]).squaredNorm();
    const double extra = std::max<double>(static_cast<double>(designs[l].n()) - q, 0.0);
    rss[k] += r;
    dof[k] += extra;
    all_rss += r;
    all_dof += extra;
  }
  for (int k = 0; k < K; ++k) {
    if (p.pi[k] == 0.0) throw Error(ErrorCode::EmptyCluster, "initial partition leaves a cluster empty");
    p.mu[static_cast<std::size_t>(k)] /= p.pi[k];
  }
  Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(q, q);
  for (std::size_t l = 0; l < L; ++l) {
    const auto k = static_cast<std::size_t>(assignment[l]);
    const Eigen::VectorXd dev = coefs[l] - p.mu[k];
    raw[k] += dev * dev.transpose();
    pooled += dev * dev.transpose();
  }
  for (int k = 0; k < K; ++k) raw[static_cast<std::size_t>(k)] /= p.pi[k];
  pooled /= static_cast<double>(L);

  double fallback_var = 0.0;
  {
    double sum = 0.0, sum2 = 0.0, n = 0.0;
    for (const auto& d : designs) {
      sum += d.s.sum();
      sum2 += d.s.squaredNorm();
      n += static_cast<double>(d.n());
    }
    fallback_var = n > 1.0 ? std::max(1e-4 * (sum2 / n - (sum / n) * (sum / n)), 0.0) : 0.0;
  }
  for (int k = 0; k < K; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    double var = dof[kk] > 0.0 ? rss[kk] / dof[kk] : (all_dof > 0.0 ? all_rss / all_dof : fallback_var);
    p.sigma[k] = std::max(std::sqrt(var), sigma_floor);
  }
  p.pi /= static_cast<double>(L);

  const ShrinkageParams init_shrink{std::max(shrink.lambda, 0.1), std::max(shrink.zeta, 0.1)};
  p.lambda = shrink_covariance(raw, pooled, init_shrink);
  const double floor = std::max(1e-6 * pooled.trace() / q, std::pow(p.sigma.maxCoeff(), 2) * 1e-6);
  for (auto& m : p.lambda) {
    if (m.trace() <= 0.0) m = Eigen::MatrixXd::Identity(q, q) * std::max(floor, 1e-12);
    make_positive_definite(m);
  }
  return p;
}

FitReport run_em(const BasisSpec& basis, const std::vector<SignalDesign>& designs,
                 const std::vector<Eigen::VectorXd>& coefs, std::span<const int> assignment, int K,
                 const ShrinkageParams& shrink, Scenario scenario, const FitOptions& options, double sigma_floor) {
  const auto L = static_cast<Eigen::Index>(designs.size());
  FitReport report;
  report.scenario = scenario;
  ModelParams params = init_from_partition(basis, designs, coefs, assignment, K, shrink, sigma_floor);

  Eigen::MatrixXd fixed;
  if (scenario == Scenario::classification) {
    fixed = Eigen::MatrixXd::Zero(L, K);
    for (Eigen::Index l = 0; l < L; ++l) fixed(l, assignment[static_cast<std::size_t>(l)]) = 1.0;
  }

  std::optional<double> previous;
  for (;;) {
    EStepResult e = e_step_designs(params, designs);
    double ll = e.loglik;
    if (scenario == Scenario::classification) {
      ll = 0.0;
      for (Eigen::Index l = 0; l < L; ++l) ll += e.log_joint(l, assignment[static_cast<std::size_t>(l)]);
      e.responsibilities = fixed;
    }
    report.loglik_trace.push_back(ll);
    const bool converged = previous && std::abs(ll - *previous) <= options.tol * std::abs(*previous);
    if (converged || report.iterations >= options.max_iter) {
      report.converged = converged;
      report.responsibilities = std::move(e.responsibilities);
      break;
    }
    previous = ll;
    params = m_step_designs(basis, designs, e.responsibilities, e.moments, shrink, sigma_floor);
    ++report.iterations;
  }

  report.params = std::move(params);
  report.hard_assignments.resize(static_cast<std::size_t>(L));
  for (Eigen::Index l = 0; l < L; ++l) {
    Eigen::Index best = 0;
    report.responsibilities.row(l).maxCoeff(&best);
    report.hard_assignments[static_cast<std::size_t>(l)] = static_cast<int>(best);
  }
  return report;
}

std::vector<int> kmeans(const std::vector<Eigen::VectorXd>& points, int K, std::mt19937_64& rng) {
  const std::size_t n = points.size();
  std::vector<Eigen::VectorXd> centers;
  centers.reserve(static_cast<std::size_t>(K));
  centers.push_back(points[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
  std::vector<double> d2(n);
  while (static_cast<int>(centers.size()) < K) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, (points[i] - c).squaredNorm());
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double u = uniform01(rng) * total;
      for (pick = 0; pick + 1 < n && u >= d2[pick]; ++pick) u -= d2[pick];
    } else {
      pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    }
    centers.push_back(points[pick]);
  }

  std::vector<int> labels(n, -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int k = 0; k < K; ++k) {
        const double d = (points[i] - centers[static_cast<std::size_t>(k)]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    std::vector<int> count(static_cast<std::size_t>(K), 0);
    for (auto& c : centers) c.setZero();
    for (std::size_t i = 0; i < n; ++i) {
      centers[static_cast<std::size_t>(labels[i])] += points[i];
      ++count[static_cast<std::size_t>(labels[i])];
    }
    for (int k = 0; k < K; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      if (count[kk] > 0) {
        centers[kk] /= count[kk];
      } else {
        // Reseed an empty cluster at the point farthest from its center.
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = (points[i] - centers[static_cast<std::size_t>(labels[i])]).squaredNorm();
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centers[kk] = points[far];
      }
    }
  }
  return labels;
}

// Relabels clusters in order of first appearance so equal partitions compare equal.
std::vector<int> canonical(std::vector<int> labels, int K) {
  std::vector<int> map(static_cast<std::size_t>(K), -1);
  int next = 0;
  for (int& x : labels) {
    auto& m = map[static_cast<std::size_t>(x)];
    if (m < 0) m = next++;
    x = m;
  }
  return labels;
}

}  // namespace

double marginal_loglik(const ModelParams& params, const DegradationSignal& signal) {
  validate_signal(signal, true);
  const SignalDesign d = make_design(params.basis, signal);
  const auto priors = component_priors(params);
  Eigen::VectorXd terms(params.K());
  for (int k = 0; k < params.K(); ++k) {
    terms[k] = std::log(params.pi[k]) + priors[static_cast<std::size_t>(k)].condition(d).log_density;
  }
  return log_sum_exp(terms);
}

EStepResult e_step(const ModelParams& params, const std::vector<DegradationSignal>& signals) {
  return e_step_designs(params, designs_for(params.basis, signals));
}

ModelParams m_step(const BasisSpec& basis, const std::vector<DegradationSignal>& signals,
                   const Eigen::MatrixXd& responsibilities,
                   const std::vector<std::vector<GammaMoments>>& moments, const ShrinkageParams& shrink) {
  for (Eigen::Index l = 0; l < responsibilities.rows(); ++l) {
    if (std::abs(responsibilities.row(l).sum() - 1.0) > 1e-8) {
      throw Error(ErrorCode::InvalidArgument, "responsibility rows must sum to 1");
    }
  }
  return m_step_designs(basis, designs_for(basis, signals), responsibilities, moments, shrink,
                        sigma_floor_for(signals));
}

std::vector<Eigen::MatrixXd> shrink_covariance(const std::vector<Eigen::MatrixXd>& raw, const Eigen::MatrixXd& pooled,
                                               const ShrinkageParams& shrink) {
  if (!(shrink.lambda >= 0.0 && shrink.lambda <= 1.0 && shrink.zeta >= 0.0 && shrink.zeta <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "shrinkage weights must lie in [0, 1]");
  }
  std::vector<Eigen::MatrixXd> out;
  out.reserve(raw.size());
  for (const auto& m : raw) {
    Eigen::MatrixXd step1 = shrink.lambda == 0.0 ? m : Eigen::MatrixXd((1.0 - shrink.lambda) * m + shrink.lambda * pooled);
    if (shrink.zeta == 0.0) {
      out.push_back(std::move(step1));
      continue;
    }
    const double scale = step1.trace() / static_cast<double>(step1.rows());
    Eigen::MatrixXd step2 = (1.0 - shrink.zeta) * step1;
    step2.diagonal().array() += shrink.zeta * scale;
    out.push_back(std::move(step2));
  }
  return out;
}

std::vector<Eigen::VectorXd> ridge_coefficients(const BasisSpec& basis,
                                                const std::vector<DegradationSignal>& signals) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(signals.size());
  for (const auto& d : designs_for(basis, signals)) out.push_back(ridge_fit(d, basis.q));
  return out;
}

FitReport fit_from_assignment(const std::vector<DegradationSignal>& signals, std::span<const int> assignment, int K,
                              const BasisSpec& basis, const ShrinkageParams& shrink, Scenario scenario,
                              const FitOptions& options) {
  if (K < 1) throw Error(ErrorCode::InvalidArgument, "K must be >= 1");
  if (signals.empty()) throw Error(ErrorCode::InsufficientData, "no training signals");
  if (assignment.size() != signals.size()) throw Error(ErrorCode::LengthMismatch, "assignment length");
  for (int a : assignment) {
    if (a < 0 || a >= K) throw Error(ErrorCode::InvalidArgument, "assignment label outside 0..K-1");
  }
  const auto designs = designs_for(basis, signals);
  std::vector<Eigen::VectorXd> coefs;
  coefs.reserve(designs.size());
  for (const auto& d : designs) coefs.push_back(ridge_fit(d, basis.q));
  return run_em(basis, designs, coefs, assignment, K, shrink, scenario, options, sigma_floor_for(signals));
}

FitReport fit(const std::vector<DegradationSignal>& signals, int K, const BasisSpec& basis,
              const ShrinkageParams& shrink, Scenario scenario, const FitOptions& options) {
  if (K < 1) throw Error(ErrorCode::InvalidArgument, "K must be >= 1");
  if (signals.empty()) throw Error(ErrorCode::InsufficientData, "no training signals");

  if (scenario == Scenario::classification) {
    std::vector<int> labels;
    labels.reserve(signals.size());
    for (const auto& s : signals) {
      if (!s.env_label || *s.env_label < 1 || *s.env_label > K) {
        throw Error(ErrorCode::InvalidArgument,
                    "classification needs an env label in 1.." + std::to_string(K) + " on unit " + s.unit_id);
      }
      labels.push_back(*s.env_label - 1);
    }
    return fit_from_assignment(signals, labels, K, basis, shrink, scenario, options);
  }

  if (static_cast<std::size_t>(K) > signals.size()) {
    throw Error(ErrorCode::EmptyCluster, "more clusters than training signals");
  }
  const auto designs = designs_for(basis, signals);
  std::vector<Eigen::VectorXd> coefs;
  coefs.reserve(designs.size());
  for (const auto& d : designs) coefs.push_back(ridge_fit(d, basis.q));
  const double floor = sigma_floor_for(signals);

  if (K == 1) {
    const std::vector<int> zeros(signals.size(), 0);
    return run_em(basis, designs, coefs, zeros, 1, shrink, scenario, options, floor);
  }

  // Two families of k-means starts: raw ridge coefficients, and posterior
  // means under a single-cluster fit. The latter stay well behaved for sparse
  // signals with fewer observations than basis functions.
  std::vector<std::vector<Eigen::VectorXd>> features{coefs};
  try {
    const std::vector<int> zeros(signals.size(), 0);
    FitOptions pooled_opts = options;
    pooled_opts.max_iter = std::min(options.max_iter, 100);
    const FitReport pooled = run_em(basis, designs, coefs, zeros, 1, shrink, scenario, pooled_opts, floor);
    const ComponentPrior prior(pooled.params.mu[0], pooled.params.lambda[0], pooled.params.sigma[0]);
    std::vector<Eigen::VectorXd> blups;
    blups.reserve(designs.size());
    for (const auto& d : designs) blups.push_back(prior.condition(d).posterior.mean);
    features.push_back(std::move(blups));
  } catch (const Error&) {
  }

  std::vector<std::vector<int>> tried;
  std::optional<FitReport> best;
  std::optional<Error> last_error;
  const int restarts = std::max(1, options.restarts);
  for (int r = 0; r < restarts * static_cast<int>(features.size()); ++r) {
    auto rng = substream(options.init_seed, static_cast<std::uint64_t>(r));
    auto labels = canonical(kmeans(features[static_cast<std::size_t>(r / restarts)], K, rng), K);
    if (std::find(tried.begin(), tried.end(), labels) != tried.end()) continue;
    tried.push_back(labels);
    try {
      FitReport candidate = run_em(basis, designs, coefs, labels, K, shrink, scenario, options, floor);
      if (!best || candidate.loglik_trace.back() > best->loglik_trace.back()) best = std::move(candidate);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyCluster && e.code() != ErrorCode::SingularCovariance) throw;
      last_error = e;
    }
  }
  if (!best) {
    throw last_error ? *last_error : Error(ErrorCode::EmptyCluster, "every restart lost a cluster");
  }
  return std::move(*best);
}

double rand_index(std::span<const int> labels_a, std::span<const int> labels_b) {
  if (labels_a.size() != labels_b.size()) throw Error(ErrorCode::LengthMismatch, "labelings differ in length");
  const std::size_t n = labels_a.size();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "Rand index needs at least two items");
  std::size_t agree = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool same_a = labels_a[i] == labels_a[j];
      const bool same_b = labels_b[i] == labels_b[j];
      if (same_a == same_b) ++agree;
    }
  }
  return static_cast<double>(agree) / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

}  // namespace envdeg
