#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "matchvar/points.hpp"

namespace matchvar::regression {

/// Additive polynomial basis: 1, then x_c^p for every coordinate c and
/// p = 1..degree. Degree 1 is ordinary linear regression on (1, X).
int basis_size(int dim, int degree);
void basis_row(std::span<const double> x, int degree, std::span<double> out);

class PolynomialFit {
 public:
  PolynomialFit() = default;
  PolynomialFit(int dim, int degree, Eigen::VectorXd coefficients);

  [[nodiscard]] double predict(std::span<const double> x) const;
  [[nodiscard]] const Eigen::VectorXd& coefficients() const noexcept { return coef_; }
  [[nodiscard]] int degree() const noexcept { return degree_; }

 private:
  int dim_ = 0;
  int degree_ = 1;
  Eigen::VectorXd coef_;
};

/// Least squares of y on the basis over the selected rows (rank-revealing
/// QR). Throws kRankDeficientDesign unless the design has full column rank.
PolynomialFit fit_polynomial(const PointSet& x, std::span<const double> y, std::span<const std::size_t> rows,
                             int degree);

/// Logistic regression of w on (1, X) by iteratively reweighted least
/// squares. Empty when the iteration fails to converge or the fitted
/// probabilities collapse to 0 or 1 (separation).
std::optional<Eigen::VectorXd> fit_logistic(const PointSet& x, std::span<const int> w, int max_iterations = 50);

double logistic(double t) noexcept;

}  // namespace matchvar::regression
