#include "envdeg/basis.hpp"

#include "envdeg/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace envdeg {

namespace {

// Index i of the knot span with knots[i] <= t < knots[i + 1]; the right
// endpoint belongs to the last nonempty span.
int find_span(const BasisSpec& spec, double t) {
  const int last = spec.q - 1;
  if (t >= spec.knots[last + 1]) return last;
  const auto begin = spec.knots.begin() + BasisSpec::degree;
  const auto end = spec.knots.begin() + last + 2;
  const auto it = std::upper_bound(begin, end, t);
  return static_cast<int>(it - spec.knots.begin()) - 1;
}

}  // namespace

BasisSpec make_basis(int q, double domain_end) {
  if (q < BasisSpec::order) {
    throw Error(ErrorCode::InvalidDimension,
                "cubic B-spline basis needs q >= 4, got " + std::to_string(q));
  }
  if (!(domain_end > 0.0) || !std::isfinite(domain_end)) {
    throw Error(ErrorCode::InvalidDomain, "domain end must be a positive finite time");
  }
  BasisSpec spec;
  spec.q = q;
  spec.domain_end = domain_end;
  const int interior = q - BasisSpec::order;
  spec.knots.reserve(static_cast<std::size_t>(q + BasisSpec::order));
  spec.knots.insert(spec.knots.end(), BasisSpec::order, 0.0);
  for (int i = 1; i <= interior; ++i) {
    spec.knots.push_back(domain_end * static_cast<double>(i) / static_cast<double>(interior + 1));
  }
  spec.knots.insert(spec.knots.end(), BasisSpec::order, domain_end);
  return spec;
}

BasisSpec basis_from_knots(std::vector<double> knots) {
  const int q = static_cast<int>(knots.size()) - BasisSpec::order;
  if (q < BasisSpec::order) {
    throw Error(ErrorCode::InvalidDimension, "knot vector too short for a cubic basis");
  }
  const double end = knots.back();
  if (!(end > 0.0)) throw Error(ErrorCode::InvalidDomain, "domain end must be positive");
  for (int i = 0; i < BasisSpec::order; ++i) {
    if (knots[static_cast<std::size_t>(i)] != 0.0 ||
        knots[knots.size() - 1 - static_cast<std::size_t>(i)] != end) {
      throw Error(ErrorCode::InvalidConfig, "boundary knots must be clamped to order 4");
    }
  }
  for (std::size_t i = BasisSpec::order; i + BasisSpec::order < knots.size(); ++i) {
    if (!(knots[i] > 0.0 && knots[i] < end) || knots[i] < knots[i - 1]) {
      throw Error(ErrorCode::InvalidConfig, "interior knots must be nondecreasing inside (0, M)");
    }
  }
  BasisSpec spec;
  spec.q = q;
  spec.domain_end = end;
  spec.knots = std::move(knots);
  return spec;
}

BasisRow eval_basis_local(const BasisSpec& spec, double t) {
  if (!(t >= 0.0 && t <= spec.domain_end)) {
    throw Error(ErrorCode::OutOfDomain,
                "time " + std::to_string(t) + " outside [0, " + std::to_string(spec.domain_end) + "]");
  }
  constexpr int p = BasisSpec::degree;
  const int span = find_span(spec, t);
  const auto& u = spec.knots;

  // Cox-de Boor triangle, building the p + 1 nonzero functions in place.
  BasisRow row;
  row.first = span - p;
  std::array<double, p + 1> left{}, right{};
  row.values[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = t - u[static_cast<std::size_t>(span + 1 - j)];
    right[j] = u[static_cast<std::size_t>(span + j)] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double temp = denom == 0.0 ? 0.0 : row.values[r] / denom;
      row.values[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    row.values[j] = saved;
  }
  return row;
}

Eigen::VectorXd eval_basis(const BasisSpec& spec, double t) {
  const BasisRow row = eval_basis_local(spec, t);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(spec.q);
  for (int j = 0; j < BasisSpec::order; ++j) out[row.first + j] = row.values[j];
  return out;
}

Eigen::MatrixXd design_matrix(const BasisSpec& spec, std::span<const double> times) {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(times.size()), spec.q);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const BasisRow row = eval_basis_local(spec, times[i]);
    for (int j = 0; j < BasisSpec::order; ++j) {
      b(static_cast<Eigen::Index>(i), row.first + j) = row.values[j];
    }
  }
  return b;
}

double eval_curve(const BasisSpec& spec, const Eigen::VectorXd& coefficients, double t) {
  const BasisRow row = eval_basis_local(spec, t);
  double s = 0.0;
  for (int j = 0; j < BasisSpec::order; ++j) s += row.values[j] * coefficients[row.first + j];
  return s;
}

}  // namespace envdeg
