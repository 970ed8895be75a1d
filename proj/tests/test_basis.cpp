#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "envdeg/basis.hpp"
#include "envdeg/error.hpp"
#include "oracles.hpp"

#include <random>

using namespace envdeg;

TEST_CASE("knot placement") {
  const auto s4 = make_basis(4, 20.0);
  CHECK(s4.q == 4);
  CHECK(s4.knots == std::vector<double>{0, 0, 0, 0, 20, 20, 20, 20});

  const auto s5 = make_basis(5, 20.0);
  CHECK(s5.knots == std::vector<double>{0, 0, 0, 0, 10, 20, 20, 20, 20});
  CHECK(eval_basis(s5, 0.0).size() == 5);
}

TEST_CASE("invalid construction") {
  CHECK_THROWS_AS(make_basis(3, 20.0), Error);
  try {
    make_basis(3, 20.0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidDimension);
  }
  try {
    make_basis(5, 0.0);
    FAIL("expected InvalidDomain");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidDomain);
  }
  const auto s = make_basis(6, 10.0);
  for (double t : {-1e-9, 10.0 + 1e-9}) {
    try {
      eval_basis(s, t);
      FAIL("expected OutOfDomain");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::OutOfDomain);
    }
  }
}

TEST_CASE("endpoints of a clamped basis") {
  for (int q : {4, 5, 9}) {
    const auto s = make_basis(q, 20.0);
    const Eigen::VectorXd first = eval_basis(s, 0.0), last = eval_basis(s, 20.0);
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(q), e1 = Eigen::VectorXd::Zero(q);
    e0(0) = 1.0;
    e1(q - 1) = 1.0;
    CHECK(first == e0);
    CHECK(last == e1);
  }
}

TEST_CASE("interior knot value against recursive oracle") {
  const auto s = make_basis(5, 20.0);
  const Eigen::VectorXd row = eval_basis(s, 10.0);
  const Eigen::VectorXd ref = oracle::basis_row(5, 20.0, 10.0);
  CHECK((row - ref).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(row.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((row.array() > 0.0).count() >= 2);
}

TEST_CASE("random points agree with recursive oracle") {
  std::mt19937_64 rng(11);
  for (int q : {4, 5, 8, 15}) {
    const double M = 17.5;
    const auto s = make_basis(q, M);
    std::uniform_real_distribution<double> u(0.0, M);
    for (int i = 0; i < 200; ++i) {
      const double t = u(rng);
      CHECK((eval_basis(s, t) - oracle::basis_row(q, M, t)).cwiseAbs().maxCoeff() < 1e-13);
    }
  }
}

TEST_CASE("partition of unity, nonnegativity, local support") {
  std::mt19937_64 rng(3);
  for (int q : {4, 5, 8, 15}) {
    const auto s = make_basis(q, 20.0);
    std::uniform_real_distribution<double> u(0.0, 20.0);
    for (int i = 0; i < 1000; ++i) {
      const Eigen::VectorXd row = eval_basis(s, u(rng));
      CHECK(std::abs(row.sum() - 1.0) < 1e-10);
      CHECK(row.minCoeff() >= 0.0);
      CHECK((row.array() != 0.0).count() <= 4);
    }
  }
}

TEST_CASE("constant coefficients reproduce the constant") {
  const auto s = make_basis(9, 5.0);
  const Eigen::VectorXd c = Eigen::VectorXd::Constant(9, 3.25);
  for (double t = 0.0; t <= 5.0; t += 0.37) CHECK(eval_curve(s, c, t) == doctest::Approx(3.25).epsilon(1e-12));
}

TEST_CASE("design matrix") {
  const auto s = make_basis(5, 20.0);
  const std::vector<double> none;
  const Eigen::MatrixXd empty = design_matrix(s, none);
  CHECK(empty.rows() == 0);
  CHECK(empty.cols() == 5);

  const std::vector<double> ends{0.0, 20.0};
  const Eigen::MatrixXd b2 = design_matrix(s, ends);
  CHECK(b2.row(0) == eval_basis(s, 0.0).transpose());
  CHECK(b2.row(1) == eval_basis(s, 20.0).transpose());

  std::vector<double> grid;
  for (int i = 0; i <= 80; ++i) grid.push_back(0.25 * i);
  const Eigen::MatrixXd b = design_matrix(s, grid);
  CHECK(b.rows() == 81);
  CHECK(b.cols() == 5);
  for (Eigen::Index i = 0; i < b.rows(); ++i) CHECK(std::abs(b.row(i).sum() - 1.0) < 1e-12);
  // full rank: smallest Gram eigenvalue of the oracle design is clearly positive
  Eigen::MatrixXd ref(81, 5);
  for (int i = 0; i <= 80; ++i) ref.row(i) = oracle::basis_row(5, 20.0, grid[static_cast<std::size_t>(i)]).transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ref.transpose() * ref);
  CHECK(eig.eigenvalues().minCoeff() > 1e-3);
  CHECK((b - ref).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("knot vector round trip") {
  const auto s = make_basis(7, 12.0);
  CHECK(basis_from_knots(s.knots) == s);
  auto bad = s.knots;
  bad[0] = -1.0;
  CHECK_THROWS_AS(basis_from_knots(bad), Error);
}
