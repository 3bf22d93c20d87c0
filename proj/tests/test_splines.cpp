#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "evr/rng.hpp"
#include "evr/splines.hpp"

using namespace evr;

namespace {

// Independent Cox-de Boor recursion, written from the textbook definition.
double oracle_bspline(const Eigen::VectorXd& knots, int i, int d, double x) {
  if (d == 0) {
    // half-open intervals, closed at the right end of the span
    const bool last = knots[i + 1] == knots[knots.size() - 1] &&
                      x == knots[i + 1];
    return (x >= knots[i] && x < knots[i + 1]) || last ? 1.0 : 0.0;
  }
  double left = 0.0, right = 0.0;
  if (knots[i + d] > knots[i]) {
    left = (x - knots[i]) / (knots[i + d] - knots[i]) *
           oracle_bspline(knots, i, d - 1, x);
  }
  if (knots[i + d + 1] > knots[i + 1]) {
    right = (knots[i + d + 1] - x) / (knots[i + d + 1] - knots[i + 1]) *
            oracle_bspline(knots, i + 1, d - 1, x);
  }
  return left + right;
}

Eigen::VectorXd linspace(double a, double b, int n) {
  return Eigen::VectorXd::LinSpaced(n, a, b);
}

}  // namespace

TEST_CASE("equidistant interior knots") {
  const KnotGrid grid = make_knots(linspace(0.0, 1.0, 11), 3);
  // boundary knots replicated degree+1 times at each end
  REQUIRE(grid.knots.size() == 3 + 4 + 4);
  CHECK(grid.knots[4] == doctest::Approx(0.25));
  CHECK(grid.knots[5] == doctest::Approx(0.5));
  CHECK(grid.knots[6] == doctest::Approx(0.75));
  CHECK(grid.n_basis() == 3 + 4);
}

TEST_CASE("knot construction is shift equivariant") {
  const Eigen::VectorXd x = linspace(-1.0, 2.0, 17);
  const KnotGrid a = make_knots(x, 5);
  const KnotGrid b = make_knots(x.array() + 10.0, 5);
  for (int i = 0; i < a.knots.size(); ++i) {
    CHECK(b.knots[i] == doctest::Approx(a.knots[i] + 10.0).epsilon(1e-12));
  }
}

TEST_CASE("constant covariate rejected") {
  CHECK_THROWS_AS(make_knots(Eigen::VectorXd::Constant(6, 1.0), 3),
                  std::invalid_argument);
}

TEST_CASE("basis rows sum to one with at most 4 nonzeros") {
  const Eigen::VectorXd x = linspace(0.0, 1.0, 40);
  const KnotGrid grid = make_knots(x, 6);
  const Eigen::MatrixXd B = bspline_basis(x, grid);
  REQUIRE(B.cols() == 10);
  for (int s = 0; s < B.rows(); ++s) {
    CHECK(B.row(s).sum() == doctest::Approx(1.0).epsilon(1e-12));
    int nonzero = 0;
    for (int k = 0; k < B.cols(); ++k) {
      CHECK(B(s, k) >= 0.0);
      CHECK(B(s, k) <= 1.0);
      nonzero += B(s, k) > 1e-14;
    }
    CHECK(nonzero <= 4);
  }
}

TEST_CASE("at most 3 nonzeros at an interior knot") {
  const Eigen::VectorXd x = linspace(0.0, 1.0, 9);
  const KnotGrid grid = make_knots(x, 3);
  Eigen::VectorXd at_knot(1);
  at_knot << 0.5;
  const Eigen::MatrixXd row = bspline_basis(at_knot, grid);
  int nonzero = 0;
  for (int k = 0; k < row.cols(); ++k) nonzero += row(0, k) > 1e-14;
  CHECK(nonzero <= 3);
}

TEST_CASE("basis matches the recursion oracle") {
  const Eigen::VectorXd x = linspace(-2.0, 3.0, 25);
  const KnotGrid grid = make_knots(x, 4);
  Rng rng(21);
  Eigen::VectorXd pts(60);
  for (int i = 0; i < pts.size(); ++i) pts[i] = rng.uniform(-2.0, 3.0);
  const Eigen::MatrixXd B = bspline_basis(pts, grid);
  for (int s = 0; s < pts.size(); ++s) {
    for (int k = 0; k < grid.n_basis(); ++k) {
      const double ref = oracle_bspline(grid.knots, k, grid.degree, pts[s]);
      CHECK(B(s, k) == doctest::Approx(ref).epsilon(1e-10));
    }
  }
}

TEST_CASE("evaluation outside the span rejected, clamped row provided") {
  const Eigen::VectorXd x = linspace(0.0, 1.0, 9);
  const KnotGrid grid = make_knots(x, 3);
  Eigen::VectorXd bad(1);
  bad << 1.5;
  CHECK_THROWS_AS(bspline_basis(bad, grid), std::invalid_argument);
  const Eigen::RowVectorXd clamped = bspline_row_clamped(1.5, grid);
  Eigen::VectorXd hi(1);
  hi << 1.0;
  const Eigen::MatrixXd edge = bspline_basis(hi, grid);
  for (int k = 0; k < grid.n_basis(); ++k) {
    CHECK(clamped[k] == doctest::Approx(edge(0, k)).epsilon(1e-12));
  }
}

TEST_CASE("row evaluation commutes with permutation") {
  const Eigen::VectorXd x = linspace(0.0, 2.0, 12);
  const KnotGrid grid = make_knots(x, 4);
  Eigen::VectorXd perm(12);
  for (int i = 0; i < 12; ++i) perm[i] = x[11 - i];
  const Eigen::MatrixXd A = bspline_basis(x, grid);
  const Eigen::MatrixXd P = bspline_basis(perm, grid);
  for (int i = 0; i < 12; ++i) {
    CHECK((A.row(11 - i) - P.row(i)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("rw2 penalty rank and null space") {
  const SplinePenalty pen = rw2_precision(5);
  CHECK(pen.rank == 3);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pen.K);
  int positive = 0;
  for (int i = 0; i < 5; ++i) positive += es.eigenvalues()[i] > 1e-10;
  CHECK(positive == 3);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(5);
  Eigen::VectorXd lin(5);
  lin << 1, 2, 3, 4, 5;
  CHECK((pen.K * ones).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((pen.K * lin).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(rw2_precision(2), std::invalid_argument);
}

TEST_CASE("rw2 quadratic form sums squared second differences") {
  Rng rng(33);
  const SplinePenalty pen = rw2_precision(9);
  for (int rep = 0; rep < 10; ++rep) {
    Eigen::VectorXd g(9);
    for (int i = 0; i < 9; ++i) g[i] = rng.normal();
    double ssd = 0.0;
    for (int i = 0; i < 7; ++i) {
      const double d2 = g[i] - 2.0 * g[i + 1] + g[i + 2];
      ssd += d2 * d2;
    }
    CHECK(g.dot(pen.K * g) == doctest::Approx(ssd).epsilon(1e-12));
  }
}

TEST_CASE("decomposition identities") {
  Rng rng(44);
  Eigen::VectorXd x(30);
  for (int i = 0; i < 30; ++i) x[i] = rng.normal();
  const DecomposedBasis dec = build_spline_block(x, 12);
  const SplinePenalty pen = rw2_precision(12);
  const Eigen::MatrixXd target = dec.B * dec.K_pinv * dec.B.transpose();
  const Eigen::MatrixXd recon =
      dec.U_plus * dec.eigvals.asDiagonal() * dec.U_plus.transpose();
  CHECK((target - recon).norm() / target.norm() < 1e-10);
  CHECK((dec.B_tilde * dec.B_tilde.transpose() - target).norm() /
            target.norm() <
        1e-10);
  CHECK(dec.eigvals.size() == 10);
  CHECK(dec.eigvals.minCoeff() > 0.0);
  CHECK((dec.U_plus.transpose() * dec.U_plus -
         Eigen::MatrixXd::Identity(10, 10))
            .cwiseAbs()
            .maxCoeff() < 1e-10);
  // Moore-Penrose identity for the penalty
  CHECK((pen.K * dec.K_pinv * pen.K - pen.K).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("prior covariance equivalence of the reparameterization") {
  // gamma_tilde ~ N(0, w^2 I) implies Cov(B_tilde gamma_tilde) =
  // w^2 B K^- B' as an exact matrix identity.
  Rng rng(55);
  Eigen::VectorXd x(25);
  for (int i = 0; i < 25; ++i) x[i] = rng.normal();
  const DecomposedBasis dec = build_spline_block(x, 10);
  const double w2 = 2.7;
  const Eigen::MatrixXd lhs = w2 * dec.B_tilde * dec.B_tilde.transpose();
  const Eigen::MatrixXd rhs = w2 * dec.B * dec.K_pinv * dec.B.transpose();
  CHECK((lhs - rhs).norm() / rhs.norm() < 1e-10);
}

TEST_CASE("degenerate basis rejected when S is too small") {
  Eigen::VectorXd x(4);
  x << 0.0, 0.3, 0.7, 1.0;
  CHECK_THROWS_AS(build_spline_block(x, 12), std::runtime_error);
}

TEST_CASE("group design layout") {
  Rng rng(66);
  Eigen::VectorXd x(20);
  for (int i = 0; i < 20; ++i) x[i] = rng.normal();
  const DecomposedBasis dec = build_spline_block(x, 8);
  const GroupDesign gd = build_group_design(dec, 2);
  CHECK(gd.covariate == 2);
  CHECK(gd.Z.cols() == 7);
  CHECK((gd.Z.col(0) - x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((gd.Z.rightCols(6) - dec.B_tilde).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("out-of-sample projection reproduces training rows") {
  Rng rng(77);
  Eigen::VectorXd x(30);
  for (int i = 0; i < 30; ++i) x[i] = rng.normal();
  const DecomposedBasis dec = build_spline_block(x, 9);
  for (int s = 0; s < 30; ++s) {
    const Eigen::RowVectorXd row = penalized_row(dec, x[s]);
    CHECK((row - dec.B_tilde.row(s)).cwiseAbs().maxCoeff() < 1e-8);
  }
}
