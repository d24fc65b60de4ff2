#pragma once

#include <span>
#include <vector>

#include "matchvar/rng.hpp"

/// Balls, spherical caps and two-ball unions in R^d.
namespace matchvar::geometry {

/// Two balls of radii r1, r2 whose centers are t apart.
struct BallUnionConfig {
  int dim = 1;
  double r1 = 0.0;
  double r2 = 0.0;
  double t = 0.0;

  void validate() const;
};

/// Unit vector in R^d (norm 1 within 1e-12).
class UnitDirection {
 public:
  explicit UnitDirection(std::vector<double> components);
  [[nodiscard]] std::span<const double> components() const noexcept { return components_; }
  [[nodiscard]] int dim() const noexcept { return static_cast<int>(components_.size()); }

 private:
  std::vector<double> components_;
};

/// Point of the closed unit ball.
class UnitBallPoint {
 public:
  explicit UnitBallPoint(std::vector<double> components);
  [[nodiscard]] std::span<const double> components() const noexcept { return components_; }
  [[nodiscard]] int dim() const noexcept { return static_cast<int>(components_.size()); }

 private:
  std::vector<double> components_;
};

/// c_d = pi^{d/2} / Gamma(d/2 + 1).
double unit_ball_volume(int d);
double ball_volume(int d, double r);

/// I_x(a, b) by Lentz's continued fraction, switching to 1 - I_{1-x}(b, a)
/// above the mean so the fraction always converges quickly.
double regularized_incomplete_beta(double a, double b, double x);

/// I_x((d+1)/2, 1/2), the fraction of a half-ball occupied by a cap, via the
/// upward recurrence in the first parameter. Exact up to rounding for every
/// d and much cheaper than the continued fraction in inner loops.
double cap_fraction(int d, double x);

/// Volume of the cap of height h in [0, 2r] cut from a radius-r ball.
double cap_volume(int d, double r, double h);

double two_ball_union_volume(const BallUnionConfig& cfg);

/// Fill `out` (size d) with a uniform direction; d = 1 gives +-1.
void sample_unit_sphere(RngStream& rng, std::span<double> out);
/// Fill `out` (size d) with a uniform point of the unit ball.
void sample_unit_ball(RngStream& rng, std::span<double> out);

UnitDirection sample_unit_sphere(int d, RngStream& rng);
UnitBallPoint sample_unit_ball(int d, RngStream& rng);

/// Volume (in units of c_d) of the union of two balls through a common point
/// with volumes v1, v2 (in units of c_d) whose center directions, seen from
/// that point, make the angle gamma.
double normalized_union_g(int d, double v1, double v2, double gamma);

/// Density of the angle between two independent uniform directions in R^d,
/// d >= 2: sin^{d-2}(gamma) / B(1/2, (d-1)/2).
double angle_density(int d, double gamma);
/// Distribution function of the same angle.
double angle_cdf(int d, double gamma);

struct UnionRoot {
  double gamma = 0.0;  ///< unique angle with normalized_union_g = 1
  double slope = 0.0;  ///< d g / d gamma at that angle (central difference)
};

/// Solves normalized_union_g(d, v1, v2, gamma) = 1 by bisection. Requires
/// max(v1, v2) < 1 < v1 + v2 (the open region where a root exists).
UnionRoot union_angle_root(int d, double v1, double v2);

/// Density at 1 of normalized_union_g(d, v1, v2, gamma) when gamma follows
/// angle_density; d >= 2.
double union_density_at_one(int d, double v1, double v2);

namespace detail {
/// Union volume without validation; `unit_volume` must equal c_d.
double union_volume(int d, double unit_volume, double r1, double r2, double t) noexcept;
/// Center separation for radii r1, r2 at angle gamma, written to stay accurate
/// for small angles.
double center_distance(double r1, double r2, double gamma) noexcept;
}  // namespace detail

}  // namespace matchvar::geometry
