#include "matchvar/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "matchvar/error.hpp"

namespace matchvar::geometry {

namespace {

constexpr int kMaxTabulatedDim = 128;

double log_gamma(double x) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

double log_beta(double a, double b) { return log_gamma(a) + log_gamma(b) - log_gamma(a + b); }

void require_dim(int d) {
  if (d < 1) fail(ErrorCode::kInvalidDimension, "dimension must be >= 1, got " + std::to_string(d));
}

// Continued fraction for I_x(a, b), modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  fail(ErrorCode::kDomain, "incomplete beta continued fraction did not converge");
}

}  // namespace

void BallUnionConfig::validate() const {
  require_dim(dim);
  if (!(r1 >= 0.0) || !(r2 >= 0.0) || !(t >= 0.0) || !std::isfinite(r1) || !std::isfinite(r2) ||
      !std::isfinite(t)) {
    fail(ErrorCode::kDomain, "ball union needs finite nonnegative radii and center distance");
  }
}

UnitDirection::UnitDirection(std::vector<double> components) : components_(std::move(components)) {
  require_dim(static_cast<int>(components_.size()));
  double s = 0.0;
  for (double c : components_) s += c * c;
  if (std::fabs(std::sqrt(s) - 1.0) > 1e-12) fail(ErrorCode::kDomain, "direction is not a unit vector");
}

UnitBallPoint::UnitBallPoint(std::vector<double> components) : components_(std::move(components)) {
  require_dim(static_cast<int>(components_.size()));
  double s = 0.0;
  for (double c : components_) s += c * c;
  if (std::sqrt(s) > 1.0 + 1e-12) fail(ErrorCode::kDomain, "point lies outside the unit ball");
}

double unit_ball_volume(int d) {
  require_dim(d);
  static const std::array<double, kMaxTabulatedDim + 1> table = [] {
    std::array<double, kMaxTabulatedDim + 1> t{};
    t[0] = 1.0;
    t[1] = 2.0;
    for (int k = 2; k <= kMaxTabulatedDim; ++k) t[k] = t[k - 2] * 2.0 * std::numbers::pi / k;
    return t;
  }();
  if (d <= kMaxTabulatedDim) return table[d];
  return std::exp(0.5 * d * std::log(std::numbers::pi) - log_gamma(0.5 * d + 1.0));
}

double ball_volume(int d, double r) {
  require_dim(d);
  if (!(r >= 0.0)) fail(ErrorCode::kDomain, "ball radius must be nonnegative");
  return unit_ball_volume(d) * std::pow(r, d);
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) fail(ErrorCode::kDomain, "incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) fail(ErrorCode::kDomain, "incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(log_front) * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - std::exp(log_front) * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double cap_fraction(int d, double x) {
  require_dim(d);
  x = std::clamp(x, 0.0, 1.0);
  const double root_one_minus = std::sqrt(1.0 - x);
  double a = 0.0;
  double value = 0.0;
  double term = 0.0;  // x^a (1-x)^{1/2} / (a B(a, 1/2))
  if (d % 2 == 0) {
    a = 0.5;
    value = 2.0 / std::numbers::pi * std::asin(std::sqrt(x));
    term = 2.0 / std::numbers::pi * std::sqrt(x) * root_one_minus;
  } else {
    a = 1.0;
    value = x / (1.0 + root_one_minus);
    term = 0.5 * x * root_one_minus;
  }
  const double target = 0.5 * (d + 1);
  while (a < target - 0.25) {
    value -= term;
    term *= x * (a + 0.5) / (a + 1.0);
    a += 1.0;
  }
  return std::max(0.0, value);
}

double cap_volume(int d, double r, double h) {
  require_dim(d);
  if (r <= 0.0) return 0.0;
  h = std::clamp(h, 0.0, 2.0 * r);
  const double full = unit_ball_volume(d) * std::pow(r, d);
  if (h <= r) return 0.5 * full * cap_fraction(d, h * (2.0 * r - h) / (r * r));
  const double g = 2.0 * r - h;
  return full - 0.5 * full * cap_fraction(d, g * (2.0 * r - g) / (r * r));
}

namespace detail {

double center_distance(double r1, double r2, double gamma) noexcept {
  const double s = std::sin(0.5 * gamma);
  const double diff = r1 - r2;
  return std::sqrt(std::max(0.0, diff * diff + 4.0 * r1 * r2 * s * s));
}

double union_volume(int d, double unit_volume, double r1, double r2, double t) noexcept {
  if (d == 1) {
    // Intervals [-r1, r1] and [t - r2, t + r2].
    const double overlap = std::max(0.0, std::min(r1, t + r2) - std::max(-r1, t - r2));
    return 2.0 * r1 + 2.0 * r2 - overlap;
  }
  const double v1 = unit_volume * std::pow(r1, d);
  const double v2 = unit_volume * std::pow(r2, d);
  if (t >= r1 + r2) return v1 + v2;
  if (t <= std::fabs(r1 - r2)) return std::max(v1, v2);
  // Radical hyperplane at distance a1 from the first center.
  const double a1 = (t * t + r1 * r1 - r2 * r2) / (2.0 * t);
  const double h1 = std::clamp(r1 - a1, 0.0, 2.0 * r1);
  const double h2 = std::clamp(r2 - (t - a1), 0.0, 2.0 * r2);
  auto cap = [d](double full, double r, double h) {
    if (h <= r) return 0.5 * full * cap_fraction(d, h * (2.0 * r - h) / (r * r));
    const double g = 2.0 * r - h;
    return full - 0.5 * full * cap_fraction(d, g * (2.0 * r - g) / (r * r));
  };
  const double intersection = cap(v1, r1, h1) + cap(v2, r2, h2);
  return std::max(std::max(v1, v2), v1 + v2 - intersection);
}

}  // namespace detail

double two_ball_union_volume(const BallUnionConfig& cfg) {
  cfg.validate();
  return detail::union_volume(cfg.dim, unit_ball_volume(cfg.dim), cfg.r1, cfg.r2, cfg.t);
}

void sample_unit_sphere(RngStream& rng, std::span<double> out) {
  require_dim(static_cast<int>(out.size()));
  for (;;) {
    double s = 0.0;
    for (double& c : out) {
      c = rng.normal();
      s += c * c;
    }
    if (s > 0.0) {
      const double inv = 1.0 / std::sqrt(s);
      for (double& c : out) c *= inv;
      return;
    }
  }
}

void sample_unit_ball(RngStream& rng, std::span<double> out) {
  sample_unit_sphere(rng, out);
  const double radius = std::pow(rng.uniform(), 1.0 / static_cast<double>(out.size()));
  for (double& c : out) c *= radius;
}

UnitDirection sample_unit_sphere(int d, RngStream& rng) {
  require_dim(d);
  std::vector<double> v(static_cast<std::size_t>(d));
  sample_unit_sphere(rng, v);
  return UnitDirection(std::move(v));
}

UnitBallPoint sample_unit_ball(int d, RngStream& rng) {
  require_dim(d);
  std::vector<double> v(static_cast<std::size_t>(d));
  sample_unit_ball(rng, v);
  return UnitBallPoint(std::move(v));
}

double normalized_union_g(int d, double v1, double v2, double gamma) {
  require_dim(d);
  if (!(v1 > 0.0 && v1 <= 1.0) || !(v2 > 0.0 && v2 <= 1.0)) {
    fail(ErrorCode::kDomain, "normalized_union_g needs v1, v2 in (0, 1]");
  }
  if (!(gamma >= 0.0 && gamma <= std::numbers::pi)) {
    fail(ErrorCode::kDomain, "angle must lie in [0, pi]");
  }
  const double r1 = std::pow(v1, 1.0 / d);
  const double r2 = std::pow(v2, 1.0 / d);
  const double cd = unit_ball_volume(d);
  return detail::union_volume(d, cd, r1, r2, detail::center_distance(r1, r2, gamma)) / cd;
}

double angle_density(int d, double gamma) {
  if (d < 2) fail(ErrorCode::kInvalidDimension, "the angle law is continuous only for d >= 2");
  if (!(gamma >= 0.0 && gamma <= std::numbers::pi)) return 0.0;
  const double log_norm = -log_beta(0.5, 0.5 * (d - 1));
  if (d == 2) return std::exp(log_norm);
  return std::exp(log_norm) * std::pow(std::sin(gamma), d - 2);
}

double angle_cdf(int d, double gamma) {
  if (d < 2) fail(ErrorCode::kInvalidDimension, "the angle law is continuous only for d >= 2");
  if (gamma <= 0.0) return 0.0;
  if (gamma >= std::numbers::pi) return 1.0;
  // (1 + cos gamma) / 2 follows Beta((d-1)/2, (d-1)/2).
  const double a = 0.5 * (d - 1);
  return 1.0 - regularized_incomplete_beta(a, a, 0.5 * (1.0 + std::cos(gamma)));
}

UnionRoot union_angle_root(int d, double v1, double v2) {
  if (d < 2) fail(ErrorCode::kInvalidDimension, "union_angle_root needs d >= 2");
  constexpr int kMaxIterations = 200;
  constexpr double kTolerance = 1e-12;
  constexpr double kStep = 1e-6;
  const double pi = std::numbers::pi;
  auto g = [&](double gamma) { return normalized_union_g(d, v1, v2, gamma); };
  if (!(g(0.0) < 1.0) || !(g(pi) > 1.0)) {
    fail(ErrorCode::kNoRoot, "union volume does not cross 1 on [0, pi]");
  }
  double lo = 0.0;
  double hi = pi;
  double root = 0.5 * pi;
  bool converged = false;
  for (int it = 0; it < kMaxIterations; ++it) {
    root = 0.5 * (lo + hi);
    const double value = g(root);
    if (std::fabs(value - 1.0) <= kTolerance || hi - lo <= 4.0 * pi * 1e-16) {
      converged = true;
      break;
    }
    (value < 1.0 ? lo : hi) = root;
  }
  if (!converged) fail(ErrorCode::kNonconvergentBisection, "bisection for the union angle did not converge");
  const double left = std::max(0.0, root - kStep);
  const double right = std::min(pi, root + kStep);
  return {root, (g(right) - g(left)) / (right - left)};
}

double union_density_at_one(int d, double v1, double v2) {
  const UnionRoot root = union_angle_root(d, v1, v2);
  return angle_density(d, root.gamma) / std::fabs(root.slope);
}

}  // namespace matchvar::geometry
