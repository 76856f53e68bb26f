#include "deeppam/basis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace deeppam {

void SplineSpec::validate() const {
  if (degree < 0) throw std::invalid_argument("spline: degree must be >= 0");
  if (!(lo < hi)) throw std::invalid_argument("spline: need lo < hi");
  if (n_basis < degree + 1)
    throw std::invalid_argument("spline: n_basis must be >= degree + 1");
  if (penalty_order < 1) throw std::invalid_argument("spline: penalty order must be >= 1");
  if (n_basis > 1 && penalty_order >= n_basis)
    throw std::invalid_argument("spline: penalty order must be < n_basis");
}

std::vector<double> make_knots(const SplineSpec& spec) {
  spec.validate();
  const int M = spec.n_basis;
  const int d = spec.degree;
  const double h = (spec.hi - spec.lo) / static_cast<double>(M - d);
  std::vector<double> knots(static_cast<std::size_t>(M + d + 1));
  for (int k = 0; k <= M + d; ++k)
    knots[static_cast<std::size_t>(k)] = spec.lo + h * static_cast<double>(k - d);
  return knots;
}

namespace {

// Cox-de Boor values of the degree+1 non-zero basis functions at x, which
// must lie in span k: knots[k] < x <= knots[k+1].  Returns N[0..degree] for
// basis indices k-degree .. k.
void deboor_values(double x, int k, int degree, const std::vector<double>& knots,
                   double* N) {
  N[0] = 1.0;
  std::vector<double> left(static_cast<std::size_t>(degree) + 1);
  std::vector<double> right(static_cast<std::size_t>(degree) + 1);
  for (int d = 1; d <= degree; ++d) {
    left[static_cast<std::size_t>(d)] = x - knots[static_cast<std::size_t>(k + 1 - d)];
    right[static_cast<std::size_t>(d)] = knots[static_cast<std::size_t>(k + d)] - x;
    double saved = 0.0;
    for (int r = 0; r < d; ++r) {
      const double denom = right[static_cast<std::size_t>(r + 1)] +
                           left[static_cast<std::size_t>(d - r)];
      const double tmp = N[r] / denom;
      N[r] = saved + right[static_cast<std::size_t>(r + 1)] * tmp;
      saved = left[static_cast<std::size_t>(d - r)] * tmp;
    }
    N[d] = saved;
  }
}

// Span index with knots[k] < x <= knots[k+1] after clamping x to [lo, hi].
// Right-closed spans keep degree-0 bases aligned with the PED interval
// convention (kappa_{j-1}, kappa_j].
int find_span(double x, const SplineSpec& spec) {
  const int M = spec.n_basis;
  const int d = spec.degree;
  const double h = (spec.hi - spec.lo) / static_cast<double>(M - d);
  int j = static_cast<int>(std::ceil((x - spec.lo) / h));
  j = std::clamp(j, 1, M - d);
  return d + j - 1;
}

}  // namespace

Eigen::MatrixXd bspline_design(std::span<const double> x, const SplineSpec& spec) {
  spec.validate();
  const auto knots = make_knots(spec);
  const int M = spec.n_basis;
  const int d = spec.degree;
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.size()), M);
  std::vector<double> N(static_cast<std::size_t>(d) + 1);
  for (std::size_t r = 0; r < x.size(); ++r) {
    const double xv = std::clamp(x[r], spec.lo, spec.hi);
    const int k = find_span(xv, spec);
    deboor_values(xv, k, d, knots, N.data());
    for (int i = 0; i <= d; ++i)
      X(static_cast<Eigen::Index>(r), k - d + i) = N[static_cast<std::size_t>(i)];
  }
  return X;
}

Eigen::MatrixXd bspline_design_derivative(std::span<const double> x,
                                          const SplineSpec& spec) {
  spec.validate();
  const auto knots = make_knots(spec);
  const int M = spec.n_basis;
  const int d = spec.degree;
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.size()), M);
  if (d == 0) return X;
  std::vector<double> N(static_cast<std::size_t>(d));
  for (std::size_t r = 0; r < x.size(); ++r) {
    const double xv = std::clamp(x[r], spec.lo, spec.hi);
    const int k = find_span(xv, spec);
    // degree-1 values at the same span cover basis indices k-d+1 .. k
    deboor_values(xv, k, d - 1, knots, N.data());
    auto lower = [&](int m) {  // value of B_{m, d-1}
      const int offset = m - (k - d + 1);
      return (offset >= 0 && offset < d) ? N[static_cast<std::size_t>(offset)] : 0.0;
    };
    for (int m = k - d; m <= k; ++m) {
      const double den1 = knots[static_cast<std::size_t>(m + d)] -
                          knots[static_cast<std::size_t>(m)];
      const double den2 = knots[static_cast<std::size_t>(m + d + 1)] -
                          knots[static_cast<std::size_t>(m + 1)];
      X(static_cast<Eigen::Index>(r), m) =
          d * (lower(m) / den1 - lower(m + 1) / den2);
    }
  }
  return X;
}

Eigen::MatrixXd difference_matrix(int n_basis, int order) {
  if (order <= 0 || order >= n_basis)
    throw std::invalid_argument("difference matrix: need 0 < order < n_basis");
  Eigen::MatrixXd D = Eigen::MatrixXd::Identity(n_basis, n_basis);
  for (int o = 0; o < order; ++o) {
    Eigen::MatrixXd next(D.rows() - 1, D.cols());
    for (Eigen::Index r = 0; r + 1 < D.rows(); ++r)
      next.row(r) = D.row(r + 1) - D.row(r);
    D = std::move(next);
  }
  return D;
}

Eigen::MatrixXd difference_penalty(int n_basis, int order) {
  const Eigen::MatrixXd D = difference_matrix(n_basis, order);
  return D.transpose() * D;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> center_constraint(
    const Eigen::MatrixXd& design) {
  if (design.cols() < 2)
    throw std::invalid_argument("center constraint: need at least 2 columns");
  const Eigen::VectorXd c = design.colwise().sum().transpose();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(c);
  const Eigen::MatrixXd Q = qr.householderQ();
  const Eigen::MatrixXd Z = Q.rightCols(design.cols() - 1);
  return {design * Z, Z};
}

}  // namespace deeppam
