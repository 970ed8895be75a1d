#pragma once

#include <Eigen/Dense>

#include <array>
#include <span>
#include <vector>

namespace envdeg {

/// Clamped cubic B-spline basis on [0, domain_end].
///
/// `q` is the total number of basis functions. The knot vector has q + 4
/// entries: four copies of 0, q - 4 equally spaced interior knots, and four
/// copies of domain_end.
struct BasisSpec {
  static constexpr int order = 4;
  static constexpr int degree = order - 1;

  int q = 0;
  double domain_end = 0.0;
  std::vector<double> knots;

  bool operator==(const BasisSpec&) const = default;
};

/// Nonzero part of one basis row: B_j(t) for j = first .. first + 3.
struct BasisRow {
  int first = 0;
  std::array<double, BasisSpec::order> values{};
};

BasisSpec make_basis(int q, double domain_end);

/// Rebuilds a basis from a stored knot vector; validates the clamped layout.
BasisSpec basis_from_knots(std::vector<double> knots);

BasisRow eval_basis_local(const BasisSpec& spec, double t);

/// Row vector (B_1(t), ..., B_q(t)).
Eigen::VectorXd eval_basis(const BasisSpec& spec, double t);

/// One row per time, each equal to eval_basis at that time.
Eigen::MatrixXd design_matrix(const BasisSpec& spec, std::span<const double> times);

/// Evaluates the curve B(t) * coefficients.
double eval_curve(const BasisSpec& spec, const Eigen::VectorXd& coefficients, double t);

}  // namespace envdeg
