#pragma once

#include <Eigen/Dense>

namespace evr {

// Knot vector for cubic B-splines: boundary knots replicated degree+1 times
// around equidistant interior knots.
struct KnotGrid {
  Eigen::VectorXd knots;  // full (extended) knot vector, nondecreasing
  int degree = 3;
  int n_basis() const {
    return static_cast<int>(knots.size()) - degree - 1;
  }
  double span_lo() const { return knots[degree]; }
  double span_hi() const { return knots[knots.size() - degree - 1]; }
};

KnotGrid make_knots(const Eigen::VectorXd& x, int n_interior);

// S x K basis matrix; throws if any x lies outside the knot span.
Eigen::MatrixXd bspline_basis(const Eigen::VectorXd& x, const KnotGrid& grid);

// Single row, with x clamped to the knot span (out-of-sample convention).
Eigen::RowVectorXd bspline_row_clamped(double x, const KnotGrid& grid);

// Second-order random-walk precision K_gamma = D2' D2, rank K-2.
struct SplinePenalty {
  Eigen::MatrixXd K;
  int rank = 0;
};
SplinePenalty rw2_precision(int n_basis);

// Spectral split of B K_gamma^- B' into the orthonormal penalized basis
// B_tilde = U+ Lambda+^(1/2) plus the unpenalized linear column.
struct DecomposedBasis {
  KnotGrid grid;
  Eigen::MatrixXd B;        // S x K raw basis
  Eigen::MatrixXd B_tilde;  // S x (K-2)
  Eigen::VectorXd x_col;    // standardized covariate (unpenalized part)
  Eigen::VectorXd eigvals;  // K-2 positive eigenvalues
  Eigen::MatrixXd U_plus;   // S x (K-2)
  Eigen::MatrixXd K_pinv;   // K x K Moore-Penrose inverse of the penalty
  // K x (K-2) projector taking a raw basis row to the penalized columns:
  // b_tilde_new = b_new' * proj
  Eigen::MatrixXd proj;
  int n_basis() const { return static_cast<int>(B.cols()); }
};

DecomposedBasis decompose_penalty(const Eigen::MatrixXd& B,
                                  const SplinePenalty& pen,
                                  const Eigen::VectorXd& x,
                                  const KnotGrid& grid);

// Convenience: knots + basis + penalty + decomposition for one covariate.
DecomposedBasis build_spline_block(const Eigen::VectorXd& x, int n_basis);

// Z_m = [x | B_tilde], the grouped design for one covariate.
struct GroupDesign {
  Eigen::MatrixXd Z;  // S x (K-1)
  int covariate = 0;
};
GroupDesign build_group_design(const DecomposedBasis& dec, int m);

// Penalized-column row for a new covariate value (clamped to the span).
Eigen::RowVectorXd penalized_row(const DecomposedBasis& dec, double x_new);

}  // namespace evr
