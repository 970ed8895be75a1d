#pragma once

#include "envdeg/basis.hpp"
#include "envdeg/signal.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace envdeg {

enum class Scenario { classification, clustering };

std::string_view to_string(Scenario scenario) noexcept;
Scenario parse_scenario(std::string_view text);

/// Two-step regularized-discriminant shrinkage weights, both in [0, 1].
/// lambda pulls each cluster covariance toward the pooled covariance; zeta then
/// pulls the result toward trace / q times the identity.
struct ShrinkageParams {
  double lambda = 0.0;
  double zeta = 0.0;
};

/// Mixture of Bayesian B-spline regressions:
///   Z ~ Multinomial(pi), gamma | Z = k ~ N(mu_k, Lambda_k),
///   S(t) = B(t) gamma + eps, eps | Z = k ~ N(0, sigma_k^2).
struct ModelParams {
  BasisSpec basis;
  Eigen::VectorXd pi;
  std::vector<Eigen::VectorXd> mu;
  std::vector<Eigen::MatrixXd> lambda;
  Eigen::VectorXd sigma;

  int K() const noexcept { return static_cast<int>(pi.size()); }
  int q() const noexcept { return basis.q; }

  /// Throws InvalidConfig if dimensions disagree, pi is not a probability
  /// vector, a Lambda_k is not symmetric positive definite or a sigma_k <= 0.
  void validate() const;
};

struct GammaMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Design matrix and sufficient statistics of one signal under a basis.
struct SignalDesign {
  Eigen::MatrixXd b;     // n x q
  Eigen::VectorXd s;     // n
  Eigen::MatrixXd gram;  // B^T B
  Eigen::VectorXd bts;   // B^T S
  Eigen::Index n() const noexcept { return s.size(); }
};

SignalDesign make_design(const BasisSpec& basis, const DegradationSignal& signal);

/// Factorized Gaussian prior N(mu, Lambda) with noise level sigma for one cluster.
class ComponentPrior {
 public:
  ComponentPrior(const Eigen::VectorXd& mu, const Eigen::MatrixXd& lambda, double sigma);

  struct Result {
    double log_density;  // log N(S; B mu, B Lambda B^T + sigma^2 I)
    GammaMoments posterior;
  };

  /// Marginal density of the signal and the Gaussian posterior of gamma,
  /// computed in coefficient space via the Woodbury identity.
  Result condition(const SignalDesign& design) const;

 private:
  Eigen::VectorXd mu_;
  Eigen::MatrixXd lambda_inv_;
  Eigen::VectorXd lambda_inv_mu_;
  double log_det_lambda_ = 0.0;
  double sigma2_ = 1.0;
};

std::vector<ComponentPrior> component_priors(const ModelParams& params);

/// Log-sum-exp of a vector; -inf for an all -inf input.
double log_sum_exp(const Eigen::VectorXd& v);

double marginal_loglik(const ModelParams& params, const DegradationSignal& signal);

struct EStepResult {
  Eigen::MatrixXd responsibilities;                 // L x K, rows sum to 1
  std::vector<std::vector<GammaMoments>> moments;   // [l][k]
  Eigen::MatrixXd log_joint;                        // log pi_k + log f_k(S_l)
  double loglik = 0.0;                              // observed-data log-likelihood
};

EStepResult e_step(const ModelParams& params, const std::vector<DegradationSignal>& signals);

ModelParams m_step(const BasisSpec& basis, const std::vector<DegradationSignal>& signals,
                   const Eigen::MatrixXd& responsibilities,
                   const std::vector<std::vector<GammaMoments>>& moments, const ShrinkageParams& shrink);

std::vector<Eigen::MatrixXd> shrink_covariance(const std::vector<Eigen::MatrixXd>& raw, const Eigen::MatrixXd& pooled,
                                               const ShrinkageParams& shrink);

struct FitOptions {
  std::uint64_t init_seed = 0;
  int max_iter = 500;
  double tol = 1e-6;
  int restarts = 10;
};

struct FitReport {
  ModelParams params;
  Scenario scenario = Scenario::clustering;
  Eigen::MatrixXd responsibilities;
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;
  std::vector<int> hard_assignments;  // 0-based cluster index per signal
};

/// Maximum-likelihood fit by EM. Classification fixes responsibilities to the
/// env labels (which must cover 1..K on every signal); clustering alternates
/// E and M steps from k-means starts on per-signal ridge coefficients and keeps
/// the best restart by final log-likelihood.
FitReport fit(const std::vector<DegradationSignal>& signals, int K, const BasisSpec& basis,
              const ShrinkageParams& shrink, Scenario scenario, const FitOptions& options = {});

/// EM started from a hard partition (0-based labels). With the classification
/// scenario the partition is held fixed.
FitReport fit_from_assignment(const std::vector<DegradationSignal>& signals, std::span<const int> assignment, int K,
                              const BasisSpec& basis, const ShrinkageParams& shrink, Scenario scenario,
                              const FitOptions& options = {});

/// Per-signal ridge estimates of the basis coefficients (used to seed EM).
std::vector<Eigen::VectorXd> ridge_coefficients(const BasisSpec& basis,
                                                const std::vector<DegradationSignal>& signals);

/// Fraction of unordered pairs on which two labelings agree.
double rand_index(std::span<const int> labels_a, std::span<const int> labels_b);

}  // namespace envdeg
