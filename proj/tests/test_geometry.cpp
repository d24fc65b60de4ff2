#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "matchvar/error.hpp"
#include "matchvar/geometry.hpp"
#include "matchvar/rng.hpp"

using namespace matchvar;
using namespace matchvar::geometry;
using std::numbers::pi;

namespace {

// Area of the overlap of two discs, the classical lens formula.
double lens_area(double r1, double r2, double t) {
  if (t >= r1 + r2) return 0.0;
  if (t <= std::fabs(r1 - r2)) return pi * std::pow(std::min(r1, r2), 2);
  const double a = r1 * r1 * std::acos((t * t + r1 * r1 - r2 * r2) / (2 * t * r1));
  const double b = r2 * r2 * std::acos((t * t + r2 * r2 - r1 * r1) / (2 * t * r2));
  const double c = 0.5 * std::sqrt((-t + r1 + r2) * (t + r1 - r2) * (t - r1 + r2) * (t + r1 + r2));
  return a + b - c;
}

// Overlap volume of two balls in R^3.
double lens_volume(double r1, double r2, double t) {
  if (t >= r1 + r2) return 0.0;
  if (t <= std::fabs(r1 - r2)) return 4.0 / 3.0 * pi * std::pow(std::min(r1, r2), 3);
  return pi * std::pow(r1 + r2 - t, 2) * (t * t + 2 * t * r2 - 3 * r2 * r2 + 2 * t * r1 + 6 * r1 * r2 - 3 * r1 * r1) /
         (12 * t);
}

}  // namespace

TEST_CASE("unit ball volume matches the gamma-function formula") {
  for (int d = 1; d <= 40; ++d) {
    const double expected = std::pow(pi, 0.5 * d) / std::tgamma(0.5 * d + 1);
    CHECK(unit_ball_volume(d) == doctest::Approx(expected).epsilon(1e-13));
  }
  CHECK(unit_ball_volume(200) == doctest::Approx(std::exp(100 * std::log(pi) - std::lgamma(101.0))).epsilon(1e-12));
  CHECK(ball_volume(3, 2.0) == doctest::Approx(32.0 * pi / 3.0));
  CHECK_THROWS_AS(unit_ball_volume(0), Error);
}

TEST_CASE("incomplete beta agrees with boost") {
  const double params[] = {0.5, 1.0, 1.5, 2.0, 3.5, 5.5, 12.0};
  for (double a : params) {
    for (double b : params) {
      for (double x = 0.0; x <= 1.0; x += 0.0625) {
        CHECK(regularized_incomplete_beta(a, b, x) ==
              doctest::Approx(boost::math::ibeta(a, b, x)).epsilon(1e-12).scale(1.0));
      }
    }
  }
  CHECK_THROWS_AS(regularized_incomplete_beta(-1.0, 1.0, 0.5), Error);
  CHECK_THROWS_AS(regularized_incomplete_beta(1.0, 1.0, 1.5), Error);
}

TEST_CASE("cap fraction recurrence agrees with boost ibeta") {
  for (int d = 1; d <= 30; ++d) {
    for (double x = 0.0; x <= 1.0; x += 0.05) {
      CHECK(cap_fraction(d, x) == doctest::Approx(boost::math::ibeta(0.5 * (d + 1), 0.5, x)).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("cap volume in two and three dimensions") {
  const double r = 1.7;
  for (int step = 0; step <= 20; ++step) {
    const double h = 0.1 * step * r;
    // Complementary cap above the center: acos is ill-conditioned near -1.
    auto small_segment = [r](double g) { return r * r * std::acos((r - g) / r) - (r - g) * std::sqrt(2 * r * g - g * g); };
    const double g = std::min(h, 2 * r);
    const double segment = g <= r ? small_segment(g) : pi * r * r - small_segment(2 * r - g);
    CHECK(cap_volume(2, r, h) == doctest::Approx(segment).epsilon(1e-12).scale(1.0));
    CHECK(cap_volume(3, r, h) == doctest::Approx(pi * h * h * (3 * r - h) / 3).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("two-ball union against lens formulas") {
  const double radii[][2] = {{1.0, 1.0}, {1.0, 0.4}, {0.3, 2.0}, {1.5, 1.2}};
  for (const auto& rr : radii) {
    for (double t = 0.0; t <= 4.0; t += 0.13) {
      const double area = pi * (rr[0] * rr[0] + rr[1] * rr[1]) - lens_area(rr[0], rr[1], t);
      CHECK(two_ball_union_volume({2, rr[0], rr[1], t}) == doctest::Approx(area).epsilon(1e-11));
      const double vol =
          4.0 / 3.0 * pi * (std::pow(rr[0], 3) + std::pow(rr[1], 3)) - lens_volume(rr[0], rr[1], t);
      CHECK(two_ball_union_volume({3, rr[0], rr[1], t}) == doctest::Approx(vol).epsilon(1e-11));
      // Intervals.
      const double overlap = std::max(0.0, std::min(rr[0], t + rr[1]) - std::max(-rr[0], t - rr[1]));
      CHECK(two_ball_union_volume({1, rr[0], rr[1], t}) == doctest::Approx(2 * rr[0] + 2 * rr[1] - overlap));
    }
  }
}

TEST_CASE("two-ball union by hit-or-miss sampling in five dimensions") {
  const int d = 5;
  const double r1 = 1.0;
  const double r2 = 0.8;
  const double t = 0.9;
  RngStream rng(42);
  const int n = 400000;
  int hits = 0;
  // Box [-r1, t + r2] x [-r1, r1]^(d-1) contains both balls.
  const double w0 = t + r2 + r1;
  const double box = w0 * std::pow(2 * r1, d - 1);
  for (int s = 0; s < n; ++s) {
    double a = 0.0;
    double b = 0.0;
    const double x0 = -r1 + w0 * rng.uniform();
    a += x0 * x0;
    b += (x0 - t) * (x0 - t);
    for (int c = 1; c < d; ++c) {
      const double xc = -r1 + 2 * r1 * rng.uniform();
      a += xc * xc;
      b += xc * xc;
    }
    if (a <= r1 * r1 || b <= r2 * r2) ++hits;
  }
  const double p = static_cast<double>(hits) / n;
  const double estimate = box * p;
  const double se = box * std::sqrt(p * (1 - p) / n);
  CHECK(std::fabs(two_ball_union_volume({d, r1, r2, t}) - estimate) < 4 * se);
}

TEST_CASE("union volume scales as k^d") {
  for (int d = 1; d <= 12; ++d) {
    for (double k : {0.01, 0.5, 3.0, 250.0}) {
      const double base = two_ball_union_volume({d, 0.7, 1.1, 0.9});
      const double scaled = two_ball_union_volume({d, 0.7 * k, 1.1 * k, 0.9 * k});
      CHECK(std::fabs(scaled - std::pow(k, d) * base) <= 1e-10 * std::pow(k, d) * base);
    }
  }
}

TEST_CASE("union of balls through a common point") {
  for (int d = 2; d <= 8; ++d) {
    CHECK(normalized_union_g(d, 0.6, 0.3, 0.0) == doctest::Approx(0.6));
    CHECK(normalized_union_g(d, 0.6, 0.3, pi) == doctest::Approx(0.9));
    double prev = 0.0;
    for (double g = 0.0; g <= pi; g += pi / 64) {
      const double v = normalized_union_g(d, 0.7, 0.5, g);
      CHECK(v >= prev - 1e-14);
      prev = v;
    }
  }
  // Swapping the balls leaves the union unchanged.
  CHECK(normalized_union_g(4, 0.2, 0.9, 1.1) == doctest::Approx(normalized_union_g(4, 0.9, 0.2, 1.1)).epsilon(1e-14));
  CHECK_THROWS_AS(normalized_union_g(2, 0.0, 0.5, 1.0), Error);
  CHECK_THROWS_AS(normalized_union_g(2, 0.5, 0.5, 4.0), Error);
}

TEST_CASE("angle law: cdf derivative is the density, and sampling agrees") {
  for (int d = 2; d <= 10; ++d) {
    CHECK(angle_cdf(d, 0.0) == 0.0);
    CHECK(angle_cdf(d, pi) == 1.0);
    CHECK(angle_cdf(d, 0.5 * pi) == doctest::Approx(0.5).epsilon(1e-12));
    for (double g = 0.2; g < 3.0; g += 0.35) {
      const double h = 1e-5;
      const double fd = (angle_cdf(d, g + h) - angle_cdf(d, g - h)) / (2 * h);
      CHECK(fd == doctest::Approx(angle_density(d, g)).epsilon(1e-6));
    }
  }
  RngStream rng(3);
  const int d = 4;
  const int n = 100000;
  std::vector<double> u(d);
  std::vector<double> v(d);
  int below = 0;
  for (int s = 0; s < n; ++s) {
    sample_unit_sphere(rng, u);
    sample_unit_sphere(rng, v);
    double dot = 0.0;
    for (int c = 0; c < d; ++c) dot += u[c] * v[c];
    if (std::acos(std::clamp(dot, -1.0, 1.0)) < 1.2) ++below;
  }
  const double p = angle_cdf(d, 1.2);
  CHECK(std::fabs(static_cast<double>(below) / n - p) < 4 * std::sqrt(p * (1 - p) / n));
  CHECK_THROWS_AS(angle_density(1, 0.3), Error);
}

TEST_CASE("root of the union equation") {
  for (int d = 2; d <= 10; ++d) {
    for (auto [v1, v2] : {std::pair{0.6, 0.6}, std::pair{0.9, 0.2}, std::pair{0.51, 0.52}, std::pair{0.99, 0.99}}) {
      const UnionRoot r = union_angle_root(d, v1, v2);
      CHECK(normalized_union_g(d, v1, v2, r.gamma) == doctest::Approx(1.0).epsilon(1e-11));
      CHECK(r.slope > 0.0);
    }
  }
  try {
    union_angle_root(3, 0.3, 0.3);
    FAIL("expected no root");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNoRoot);
  }
  CHECK_THROWS_AS(union_angle_root(3, 1.0, 0.5), Error);
}

TEST_CASE("density of the union volume at one against a histogram") {
  const int d = 3;
  const double v1 = 0.7;
  const double v2 = 0.55;
  const double exact = union_density_at_one(d, v1, v2);
  RngStream rng(17);
  const int n = 400000;
  const double half = 0.01;
  int in_bin = 0;
  std::vector<double> u(d);
  std::vector<double> w(d);
  for (int s = 0; s < n; ++s) {
    sample_unit_sphere(rng, u);
    sample_unit_sphere(rng, w);
    double dot = 0.0;
    for (int c = 0; c < d; ++c) dot += u[c] * w[c];
    const double g = normalized_union_g(d, v1, v2, std::acos(std::clamp(dot, -1.0, 1.0)));
    if (std::fabs(g - 1.0) < half) ++in_bin;
  }
  const double est = in_bin / (2.0 * half * n);
  const double se = std::sqrt(in_bin) / (2.0 * half * n);
  CHECK(std::fabs(est - exact) < 4 * se + 0.01 * exact);
}

TEST_CASE("uniform ball sampling") {
  RngStream rng(9);
  for (int d : {1, 2, 5, 9}) {
    double mean_rd = 0.0;
    const int n = 50000;
    for (int s = 0; s < n; ++s) {
      const UnitBallPoint p = sample_unit_ball(d, rng);
      double r2 = 0.0;
      for (double c : p.components()) r2 += c * c;
      mean_rd += std::pow(r2, 0.5 * d);
    }
    // |D|^d is uniform on [0, 1].
    CHECK(mean_rd / n == doctest::Approx(0.5).epsilon(0.02));
  }
  CHECK_THROWS_AS(UnitDirection({0.5, 0.5}), Error);
  CHECK_THROWS_AS(UnitBallPoint({1.0, 0.5}), Error);
  CHECK_THROWS_AS(two_ball_union_volume({2, -1.0, 1.0, 0.0}), Error);
}
