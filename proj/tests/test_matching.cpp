#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "matchvar/error.hpp"
#include "matchvar/matching.hpp"
#include "matchvar/rng.hpp"
#include "matchvar/simulation.hpp"

using namespace matchvar;
using namespace matchvar::matching;

namespace {

Dataset four_points() {
  Dataset d;
  d.y = {0, 1, 3, 5};
  d.w = {0, 0, 1, 1};
  d.x = PointSet(1, {0, 2, 0.9, 3});
  return d;
}

Dataset sample_data(int d, std::size_t n, std::uint64_t seed, const char* preset = "nonlinear-logistic-e") {
  RngStream rng(seed);
  return simulation::simulate(simulation::preset(preset, d), n, rng, 5).data;
}

}  // namespace

TEST_CASE("four-point example by hand") {
  const Dataset data = four_points();
  const MatchResult m = find_matches(data, 1);
  // Controls at 0 and 2 match the treated at 0.9 and 3; treated at 0.9 and 3
  // match the controls at 0 and 2.
  CHECK(m.matches_of(0)[0] == 2);
  CHECK(m.matches_of(1)[0] == 3);
  CHECK(m.matches_of(2)[0] == 0);
  CHECK(m.matches_of(3)[0] == 1);
  CHECK(m.times_used == std::vector<int>{1, 1, 1, 1});
  CHECK(tau_hat(data, m) == 3.5);
  const TauForms f = tau_hat_forms(data, m);
  CHECK(f.weighting == 3.5);
  CHECK(f.imputation == 3.5);
  CHECK_THROWS_AS(find_matches(data, 3), Error);
  try {
    find_matches(data, 3);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInsufficientGroup);
  }
}

TEST_CASE("matching identities on random data") {
  for (int d : {1, 2, 4}) {
    for (int M : {1, 2, 5}) {
      const Dataset data = sample_data(d, 800, 100 + d * 10 + M);
      const MatchResult m = find_matches(data, M);
      const MatchResult brute = find_matches_bruteforce(data, M);
      CHECK(m.matches == brute.matches);
      const MatchResult serial = find_matches(data, M, Execution::kSerial);
      CHECK(m.matches == serial.matches);
      // Each unit of one group is matched M times in total by the other.
      long used0 = 0;
      long used1 = 0;
      for (std::size_t i = 0; i < data.n(); ++i) (data.w[i] == 1 ? used1 : used0) += m.times_used[i];
      CHECK(used1 == static_cast<long>(data.n0()) * M);
      CHECK(used0 == static_cast<long>(data.n1()) * M);
      const TauForms f = tau_hat_forms(data, m);
      CHECK(std::fabs(f.weighting - f.imputation) <= 1e-12 * (1.0 + std::fabs(f.imputation)));
    }
  }
}

TEST_CASE("rigid motions leave the estimate unchanged") {
  const Dataset data = sample_data(2, 500, 7);
  const double base = tau_hat(data, find_matches(data, 2));
  const double base_b = bias_correction(data, find_matches(data, 2));
  Dataset moved = data;
  const double c = std::cos(0.7);
  const double s = std::sin(0.7);
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto p = data.x[i];
    auto q = moved.x.mutable_point(i);
    q[0] = c * p[0] - s * p[1] + 3.0;
    q[1] = s * p[0] + c * p[1] - 1.5;
  }
  CHECK(tau_hat(moved, find_matches(moved, 2)) == doctest::Approx(base).epsilon(1e-12));
  CHECK(bias_correction(moved, find_matches(moved, 2)) == doctest::Approx(base_b).epsilon(1e-8));
}

TEST_CASE("bias correction vanishes when every unit coincides with its matches") {
  Dataset d;
  d.y = {1, 2, 5, 7};
  d.w = {0, 1, 0, 1};
  d.x = PointSet(1, {0.0, 0.0, 1.0, 1.0});
  const MatchResult m = find_matches(d, 1);
  CHECK(bias_correction(d, m) == 0.0);
}

TEST_CASE("bias correction removes a linear mean exactly") {
  // Noiseless linear outcome with a constant effect of 2.
  Dataset data = sample_data(2, 400, 31);
  for (std::size_t i = 0; i < data.n(); ++i) {
    data.y[i] = 1.0 + 3.0 * data.x[i][0] - 2.0 * data.x[i][1] + 2.0 * data.w[i];
  }
  const MatchResult m = find_matches(data, 1);
  CHECK(tau_hat(data, m) - bias_correction(data, m) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("same-group variance surrogate") {
  Dataset d;
  d.y = {0, 3, 6, 1, 1, 1};
  d.w = {0, 0, 0, 1, 1, 1};
  d.x = PointSet(1, {0, 1, 2, 0, 1, 2});
  const auto s2 = conditional_variance_nn(d, 2);
  // Unit 0: neighbors 1, 2 with mean 4.5, so (2/3) 4.5^2.
  CHECK(s2[0] == doctest::Approx(2.0 / 3.0 * 20.25));
  CHECK(s2[1] == doctest::Approx(0.0));
  CHECK(s2[4] == 0.0);
  CHECK(conditional_variance_nn(d, 2, Execution::kSerial) == s2);
}

TEST_CASE("V^E formula") {
  const std::vector<int> k{0, 2, 1};
  const std::vector<double> s{1.0, 2.0, 4.0};
  // (1 + 0)^2 * 1 + (1 + 1)^2 * 2 + (1.5)^2 * 4 = 1 + 8 + 9
  CHECK(v_E(k, 2, s) == doctest::Approx(6.0));
}

TEST_CASE("variance weight against the closed form") {
  for (int M : {1, 2, 4}) {
    const double alpha = M * (2.0 * M + 1.0) / 2.0;
    for (double e : {0.1, 0.5, 0.8}) {
      const double m2 = M * M;
      CHECK(variance_weight(alpha, M, e, true) ==
            doctest::Approx((alpha / e + (alpha - m2 - M) * e + 2 * m2 + M - 2 * alpha) / m2));
      CHECK(variance_weight(alpha, M, e, false) == doctest::Approx(variance_weight(alpha, M, 1.0 - e, true)));
    }
  }
  // With e = 1/2 and alpha = M(2M+1)/2 (d = 1), the weight is 1 + 3/(2M) + 1/(2M^2) - ...; just positive.
  CHECK(variance_weight(1.5, 1, 0.5, true) > 0.0);
}

TEST_CASE("normal quantile and interval") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  const Interval ci = confidence_interval(1.0, 4.0, 100, 0.95);
  CHECK(ci.lo == doctest::Approx(1.0 - 1.959963984540054 * 0.2));
  CHECK(ci.hi == doctest::Approx(1.0 + 1.959963984540054 * 0.2));
}

TEST_CASE("propensity estimates") {
  const Dataset data = sample_data(2, 2000, 55, "linear-logistic-e");
  const auto c = estimate_propensity(data, {PropensityMethod::kConstant, {}, 0});
  CHECK(c[0] == doctest::Approx(data.treated_fraction()));
  const auto lg = estimate_propensity(data, {});
  const auto kn = estimate_propensity(data, {PropensityMethod::kKnn, {}, 0});
  const auto dgp = simulation::preset("linear-logistic-e", 2);
  double err_lg = 0.0;
  double err_kn = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const double e = dgp.propensity(data.x[i]);
    err_lg += std::fabs(lg[i] - e);
    err_kn += std::fabs(kn[i] - e);
  }
  CHECK(err_lg / data.n() < 0.03);
  CHECK(err_kn / data.n() < 0.08);
  Dataset all_treated = data;
  for (int& w : all_treated.w) w = 1;
  CHECK_THROWS_AS(estimate_propensity(all_treated, {}), Error);
}

TEST_CASE("oracle plug-in variance approaches the population value") {
  const auto dgp = simulation::preset("linear-logistic-e", 2);
  const double alpha = 1.280176;
  RngStream rng(77);
  const auto sim = simulation::simulate(dgp, 40000, rng, 5);
  const MatchResult m = find_matches(sim.data, 1);
  const auto pop = simulation::population_moments(dgp, alpha, 1);
  SigmaSpec sig;
  sig.method = SigmaMethod::kOracle;
  sig.oracle0 = sim.sigma2_0;
  sig.oracle1 = sim.sigma2_1;
  PropensitySpec ps;
  ps.method = PropensityMethod::kOracle;
  ps.oracle = sim.propensity;
  const auto vc = sigma2_Md_plugin(sim.data, m, alpha, ps, sig, {VTauMethod::kOracle, pop.v_tauX});
  CHECK(vc.sigma2 == doctest::Approx(pop.sigma2).epsilon(0.02));
  // Fully data-driven version is close too.
  const auto hat = sigma2_Md_plugin(sim.data, m, alpha);
  CHECK(hat.sigma2 == doctest::Approx(pop.sigma2).epsilon(0.1));
}

TEST_CASE("estimate pipeline") {
  const Dataset data = sample_data(2, 1500, 91);
  constants::ConstantsTable table;
  EstimateOptions opts;
  opts.M = 2;
  CHECK_THROWS_AS(estimate(data, opts, &table), Error);
  auto a = constants::alpha_Md_quadrature(2, 2, {});
  table.put(a);
  const EstimateReport r = estimate(data, opts, &table);
  CHECK(r.tau_bc == doctest::Approx(r.tau_hat - r.B_hat));
  REQUIRE(r.ci.has_value());
  CHECK(r.ci->lo < r.tau_bc);
  CHECK(r.ci->hi > r.tau_bc);
  CHECK(r.alpha->value == a.value);
  opts.with_variance = false;
  opts.bias_correct = false;
  const EstimateReport bare = estimate(data, opts);
  CHECK(bare.tau_bc == bare.tau_hat);
  CHECK_FALSE(bare.ci.has_value());
}
