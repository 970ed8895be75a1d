#pragma once

// Brute-force reference computations. Deliberately naive and written without
// the library's code paths so the tests compare two independent routes.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

// Textbook Cox-de Boor recursion, degree p, index i. The right end of the
// domain is closed so the last basis function equals 1 there.
inline double bspline(const std::vector<double>& u, int i, int p, double t) {
  if (p == 0) {
    const double lo = u[static_cast<std::size_t>(i)], hi = u[static_cast<std::size_t>(i) + 1];
    if (lo <= t && t < hi) return 1.0;
    // close the final nonempty span
    if (t == u.back() && hi == u.back() && lo < hi) return 1.0;
    return 0.0;
  }
  double left = 0.0, right = 0.0;
  const double d1 = u[static_cast<std::size_t>(i + p)] - u[static_cast<std::size_t>(i)];
  const double d2 = u[static_cast<std::size_t>(i + p + 1)] - u[static_cast<std::size_t>(i + 1)];
  if (d1 > 0.0) left = (t - u[static_cast<std::size_t>(i)]) / d1 * bspline(u, i, p - 1, t);
  if (d2 > 0.0) right = (u[static_cast<std::size_t>(i + p + 1)] - t) / d2 * bspline(u, i + 1, p - 1, t);
  return left + right;
}

// Clamped cubic knot vector with q functions on [0, M], built from scratch.
inline std::vector<double> clamped_knots(int q, double M) {
  std::vector<double> u(4, 0.0);
  const int interior = q - 4;
  for (int j = 1; j <= interior; ++j) u.push_back(M * j / (interior + 1));
  for (int j = 0; j < 4; ++j) u.push_back(M);
  return u;
}

inline Eigen::VectorXd basis_row(int q, double M, double t) {
  const auto u = clamped_knots(q, M);
  Eigen::VectorXd row(q);
  for (int i = 0; i < q; ++i) row(i) = bspline(u, i, 3, t);
  return row;
}

inline Eigen::MatrixXd dense_inverse(const Eigen::MatrixXd& a) { return Eigen::FullPivLU<Eigen::MatrixXd>(a).inverse(); }

// log N(s; mean, cov) from the dense n x n covariance.
inline double gaussian_logpdf(const Eigen::VectorXd& s, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(cov);
  const Eigen::VectorXd r = s - mean;
  const double quad = r.dot(lu.solve(r));
  const double logdet = std::log(std::abs(lu.determinant()));
  return -0.5 * (static_cast<double>(s.size()) * std::log(2.0 * std::numbers::pi) + logdet + quad);
}

struct Posterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double logpdf = 0.0;
};

// Gain (Kalman) form of the Bayesian linear model update, in observation space.
inline Posterior linear_gaussian(const Eigen::MatrixXd& b, const Eigen::VectorXd& s, const Eigen::VectorXd& mu,
                                 const Eigen::MatrixXd& lambda, double sigma) {
  const Eigen::Index n = b.rows();
  const Eigen::MatrixXd c = b * lambda * b.transpose() + sigma * sigma * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd gain = lambda * b.transpose() * dense_inverse(c);
  Posterior out;
  out.mean = mu + gain * (s - b * mu);
  out.cov = lambda - gain * b * lambda;
  out.logpdf = gaussian_logpdf(s, b * mu, c);
  return out;
}

// Mixture membership probabilities by direct evaluation of each dense density.
inline Eigen::VectorXd membership(const Eigen::MatrixXd& b, const Eigen::VectorXd& s, const Eigen::VectorXd& pi,
                                  const std::vector<Eigen::VectorXd>& mu, const std::vector<Eigen::MatrixXd>& lambda,
                                  const Eigen::VectorXd& sigma) {
  const Eigen::Index K = pi.size();
  Eigen::VectorXd logw(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    logw(k) = std::log(pi(k)) + linear_gaussian(b, s, mu[kk], lambda[kk], sigma(k)).logpdf;
  }
  const double top = logw.maxCoeff();
  Eigen::VectorXd w = (logw.array() - top).exp();
  return w / w.sum();
}

inline Eigen::VectorXd least_squares(const Eigen::MatrixXd& b, const Eigen::VectorXd& s) {
  return b.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(s);
}

// Random symmetric positive definite matrix with eigenvalues in [lo, hi].
template <class Rng>
Eigen::MatrixXd random_spd(int q, Rng& rng, double lo = 0.5, double hi = 3.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), ev(lo, hi);
  Eigen::MatrixXd a(q, q);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j) a(i, j) = u(rng);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::MatrixXd Q = qr.householderQ();
  Eigen::VectorXd d(q);
  for (int i = 0; i < q; ++i) d(i) = ev(rng);
  Eigen::MatrixXd out = Q * d.asDiagonal() * Q.transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace oracle
