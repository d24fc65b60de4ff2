#include "matchvar/regression.hpp"

#include <cmath>

#include "matchvar/error.hpp"

namespace matchvar::regression {

int basis_size(int dim, int degree) { return 1 + dim * degree; }

void basis_row(std::span<const double> x, int degree, std::span<double> out) {
  out[0] = 1.0;
  std::size_t col = 1;
  for (double v : x) {
    double power = 1.0;
    for (int p = 1; p <= degree; ++p) {
      power *= v;
      out[col++] = power;
    }
  }
}

PolynomialFit::PolynomialFit(int dim, int degree, Eigen::VectorXd coefficients)
    : dim_(dim), degree_(degree), coef_(std::move(coefficients)) {}

double PolynomialFit::predict(std::span<const double> x) const {
  std::vector<double> row(static_cast<std::size_t>(basis_size(dim_, degree_)));
  basis_row(x, degree_, row);
  double s = 0.0;
  for (std::size_t c = 0; c < row.size(); ++c) s += coef_[static_cast<Eigen::Index>(c)] * row[c];
  return s;
}

PolynomialFit fit_polynomial(const PointSet& x, std::span<const double> y, std::span<const std::size_t> rows,
                             int degree) {
  if (degree < 1) fail(ErrorCode::kInvalidArgument, "regression degree must be >= 1");
  const int p = basis_size(x.dim(), degree);
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n < p) fail(ErrorCode::kRankDeficientDesign, "fewer rows than regression coefficients");
  Eigen::MatrixXd design(n, p);
  Eigen::VectorXd target(n);
  std::vector<double> row(static_cast<std::size_t>(p));
  for (Eigen::Index r = 0; r < n; ++r) {
    basis_row(x[rows[static_cast<std::size_t>(r)]], degree, row);
    for (int c = 0; c < p; ++c) design(r, c) = row[static_cast<std::size_t>(c)];
    target[r] = y[rows[static_cast<std::size_t>(r)]];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) fail(ErrorCode::kRankDeficientDesign, "group design matrix is rank deficient");
  return {x.dim(), degree, qr.solve(target)};
}

double logistic(double t) noexcept {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

std::optional<Eigen::VectorXd> fit_logistic(const PointSet& x, std::span<const int> w, int max_iterations) {
  const auto n = static_cast<Eigen::Index>(x.size());
  const Eigen::Index p = x.dim() + 1;
  Eigen::MatrixXd design(n, p);
  Eigen::VectorXd target(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    design(r, 0) = 1.0;
    const auto row = x[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 1; c < p; ++c) design(r, c) = row[static_cast<std::size_t>(c - 1)];
    target[r] = w[static_cast<std::size_t>(r)];
  }
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd eta = design * beta;
    Eigen::VectorXd prob(n);
    Eigen::VectorXd weight(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      prob[r] = logistic(eta[r]);
      weight[r] = prob[r] * (1.0 - prob[r]);
    }
    if (weight.minCoeff() < 1e-10) return std::nullopt;
    const Eigen::MatrixXd hessian = design.transpose() * weight.asDiagonal() * design;
    const Eigen::VectorXd gradient = design.transpose() * (target - prob);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    if (ldlt.info() != Eigen::Success) return std::nullopt;
    const Eigen::VectorXd step = ldlt.solve(gradient);
    beta += step;
    if (!beta.allFinite()) return std::nullopt;
    if (step.lpNorm<Eigen::Infinity>() < 1e-10) return beta;
  }
  return std::nullopt;
}

}  // namespace matchvar::regression
