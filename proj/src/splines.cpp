#include "evr/splines.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace evr {

namespace {

// Non-zero basis values at x (NURBS-book triangular scheme).
// Returns the span index i with knots[i] <= x < knots[i+1]; the degree+1
// non-zero functions are N_{i-degree..i}.
int basis_funs(double x, const KnotGrid& grid, Eigen::VectorXd& N) {
  const int p = grid.degree;
  const auto& t = grid.knots;
  const int K = grid.n_basis();
  int i;
  if (x >= grid.span_hi()) {
    i = K - 1;
  } else {
    i = p;
    while (i < K - 1 && !(x < t[i + 1])) ++i;
  }
  std::vector<double> left(p + 1), right(p + 1);
  N.resize(p + 1);
  N[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - t[i + 1 - j];
    right[j] = t[i + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = N[r] / (right[r + 1] + left[j - r]);
      N[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    N[j] = saved;
  }
  return i;
}

}  // namespace

KnotGrid make_knots(const Eigen::VectorXd& x, int n_interior) {
  if (n_interior < 1) {
    throw std::invalid_argument("make_knots: need at least one interior knot");
  }
  const double lo = x.minCoeff();
  const double hi = x.maxCoeff();
  if (!(hi > lo)) {
    throw std::invalid_argument("make_knots: covariate is constant");
  }
  const int degree = 3;
  KnotGrid grid;
  grid.degree = degree;
  grid.knots.resize(n_interior + 2 * (degree + 1));
  int k = 0;
  for (int j = 0; j <= degree; ++j) grid.knots[k++] = lo;
  const double step = (hi - lo) / (n_interior + 1);
  for (int j = 1; j <= n_interior; ++j) grid.knots[k++] = lo + j * step;
  for (int j = 0; j <= degree; ++j) grid.knots[k++] = hi;
  return grid;
}

Eigen::MatrixXd bspline_basis(const Eigen::VectorXd& x, const KnotGrid& grid) {
  const int S = static_cast<int>(x.size());
  const int K = grid.n_basis();
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(S, K);
  Eigen::VectorXd N;
  for (int s = 0; s < S; ++s) {
    if (x[s] < grid.span_lo() || x[s] > grid.span_hi()) {
      throw std::invalid_argument("bspline_basis: x outside knot span");
    }
    const int i = basis_funs(x[s], grid, N);
    for (int r = 0; r <= grid.degree; ++r) {
      B(s, i - grid.degree + r) = N[r];
    }
  }
  return B;
}

Eigen::RowVectorXd bspline_row_clamped(double x, const KnotGrid& grid) {
  const double xc = std::clamp(x, grid.span_lo(), grid.span_hi());
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(grid.n_basis());
  Eigen::VectorXd N;
  const int i = basis_funs(xc, grid, N);
  for (int r = 0; r <= grid.degree; ++r) {
    row[i - grid.degree + r] = N[r];
  }
  return row;
}

SplinePenalty rw2_precision(int n_basis) {
  if (n_basis < 3) {
    throw std::invalid_argument("rw2_precision: need K >= 3");
  }
  Eigen::MatrixXd D2 = Eigen::MatrixXd::Zero(n_basis - 2, n_basis);
  for (int r = 0; r < n_basis - 2; ++r) {
    D2(r, r) = 1.0;
    D2(r, r + 1) = -2.0;
    D2(r, r + 2) = 1.0;
  }
  SplinePenalty pen;
  pen.K = D2.transpose() * D2;
  pen.rank = n_basis - 2;
  return pen;
}

DecomposedBasis decompose_penalty(const Eigen::MatrixXd& B,
                                  const SplinePenalty& pen,
                                  const Eigen::VectorXd& x,
                                  const KnotGrid& grid) {
  const int K = static_cast<int>(B.cols());
  if (pen.K.rows() != K || x.size() != B.rows()) {
    throw std::invalid_argument("decompose_penalty: shape mismatch");
  }
  // Moore-Penrose inverse of the penalty via its eigendecomposition.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> pes(pen.K);
  const Eigen::VectorXd pw = pes.eigenvalues();
  const double pthr = 1e-10 * pw[K - 1];
  Eigen::VectorXd pinv_w = Eigen::VectorXd::Zero(K);
  for (int j = 0; j < K; ++j) {
    if (pw[j] > pthr) pinv_w[j] = 1.0 / pw[j];
  }
  DecomposedBasis dec;
  dec.grid = grid;
  dec.B = B;
  dec.x_col = x;
  dec.K_pinv =
      pes.eigenvectors() * pinv_w.asDiagonal() * pes.eigenvectors().transpose();

  const Eigen::MatrixXd C = B * dec.K_pinv * B.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ces(C);
  const int S = static_cast<int>(B.rows());
  const Eigen::VectorXd cw = ces.eigenvalues();  // ascending
  const double cthr = 1e-10 * cw[S - 1];
  const int keep = K - 2;
  int positive = 0;
  for (int j = 0; j < S; ++j) {
    if (cw[j] > cthr) ++positive;
  }
  if (positive < keep) {
    throw std::runtime_error(
        "decompose_penalty: basis is degenerate (fewer than K-2 positive "
        "eigenvalues)");
  }
  dec.eigvals.resize(keep);
  dec.U_plus.resize(S, keep);
  for (int j = 0; j < keep; ++j) {
    dec.eigvals[j] = cw[S - 1 - j];
    dec.U_plus.col(j) = ces.eigenvectors().col(S - 1 - j);
  }
  dec.B_tilde = dec.U_plus * dec.eigvals.cwiseSqrt().asDiagonal();
  dec.proj = dec.K_pinv * B.transpose() * dec.U_plus *
             dec.eigvals.cwiseSqrt().cwiseInverse().asDiagonal();
  return dec;
}

DecomposedBasis build_spline_block(const Eigen::VectorXd& x, int n_basis) {
  if (n_basis < 5) {
    throw std::invalid_argument("build_spline_block: need K >= 5");
  }
  const KnotGrid grid = make_knots(x, n_basis - 4);
  const Eigen::MatrixXd B = bspline_basis(x, grid);
  return decompose_penalty(B, rw2_precision(n_basis), x, grid);
}

GroupDesign build_group_design(const DecomposedBasis& dec, int m) {
  GroupDesign gd;
  gd.covariate = m;
  const int S = static_cast<int>(dec.B.rows());
  gd.Z.resize(S, dec.B_tilde.cols() + 1);
  gd.Z.col(0) = dec.x_col;
  gd.Z.rightCols(dec.B_tilde.cols()) = dec.B_tilde;
  return gd;
}

Eigen::RowVectorXd penalized_row(const DecomposedBasis& dec, double x_new) {
  return bspline_row_clamped(x_new, dec.grid) * dec.proj;
}

}  // namespace evr
