#pragma once

#include <Eigen/Dense>
#include <span>
#include <utility>
#include <vector>

namespace deeppam {

/// B-spline basis on an equidistant knot grid over [lo, hi], with a
/// quadratic difference penalty on the coefficients.
struct SplineSpec {
  int degree = 3;
  int n_basis = 10;       // M
  double lo = 0.0;
  double hi = 1.0;
  int penalty_order = 2;  // order of the coefficient differences

  /// n_basis == 1 is allowed as a degenerate constant basis; such a term
  /// carries no penalty and is suppressed by the design builder.
  void validate() const;
};

/// Extended equidistant knot vector (size n_basis + degree + 1); the knots
/// continue past [lo, hi] so no knot is repeated.
std::vector<double> make_knots(const SplineSpec& spec);

/// Design matrix len(x) x M.  Values outside [lo, hi] are clamped to the
/// range, giving constant extrapolation of fitted smooths.  Spans are
/// right-closed, so a degree-0 basis indicates the interval (tau_k, tau_k+1].
Eigen::MatrixXd bspline_design(std::span<const double> x, const SplineSpec& spec);

/// Analytic first derivative of each basis function at x (clamped as above).
Eigen::MatrixXd bspline_design_derivative(std::span<const double> x,
                                          const SplineSpec& spec);

/// Forward-difference matrix of the given order, shape (M - order) x M.
Eigen::MatrixXd difference_matrix(int n_basis, int order);

/// Penalty D^T D for the order-th differences; symmetric PSD with a null
/// space of dimension `order`.
Eigen::MatrixXd difference_penalty(int n_basis, int order);

/// Reparametrizes `design` so its columns are orthogonal to the all-ones
/// vector (sum-to-zero constraint).  Returns the constrained design (one
/// column fewer) and the M x (M-1) transform Z with theta = Z * phi; the
/// same Z maps the penalty to Z^T S Z.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> center_constraint(
    const Eigen::MatrixXd& design);

}  // namespace deeppam
