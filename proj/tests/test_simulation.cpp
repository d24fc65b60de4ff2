#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "matchvar/error.hpp"
#include "matchvar/matching.hpp"
#include "matchvar/parallel.hpp"
#include "matchvar/simulation.hpp"

using namespace matchvar;
using namespace matchvar::simulation;

TEST_CASE("presets are valid and distinct") {
  const auto names = preset_names();
  CHECK(names.size() == 4);
  std::vector<std::uint64_t> seeds;
  for (const auto& name : names) {
    for (int d : {1, 2, 3}) {
      const DGPSpec dgp = preset(name, d);
      CHECK_NOTHROW(dgp.validate());
      CHECK(dgp.d == d);
    }
    seeds.push_back(preset(name).default_seed);
  }
  std::sort(seeds.begin(), seeds.end());
  CHECK(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end());
  try {
    preset("quadratic-everything");
    FAIL("expected unknown preset");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnsupportedSpec);
  }
}

TEST_CASE("DGP config text") {
  const DGPSpec dgp = dgp_from_json_text(R"({"preset": "linear-logistic-e", "d": 3, "t1": 2.5})");
  CHECK(dgp.d == 3);
  CHECK(dgp.t1 == 2.5);
  CHECK(dgp.logistic_propensity);
  const DGPSpec back = dgp_from_json_text(dgp_to_json_text(dgp));
  CHECK(dgp_to_json_text(back) == dgp_to_json_text(dgp));
  CHECK_THROWS_AS(dgp_from_json_text(R"({"bogus": 1})"), Error);
  CHECK_THROWS_AS(dgp_from_json_text(R"({"e_const": 0.99})"), Error);
  CHECK_THROWS_AS(dgp_from_json_text("not json"), Error);
}

TEST_CASE("population moments against sample averages") {
  const DGPSpec dgp = preset("nonlinear-logistic-e", 2);
  const double alpha = 4.5715;
  const PopulationMoments pop = population_moments(dgp, alpha, 2);
  RngStream rng(1);
  const SimulatedData sim = simulate(dgp, 400000, rng);
  double tau = 0.0;
  double tau2 = 0.0;
  double noise = 0.0;
  for (std::size_t i = 0; i < sim.data.n(); ++i) {
    const auto x = sim.data.x[i];
    const double t = dgp.effect(x);
    tau += t;
    tau2 += t * t;
    const double e = dgp.propensity(x);
    noise += dgp.variance(1, x) * matching::variance_weight(alpha, 2, e, true) +
             dgp.variance(0, x) * matching::variance_weight(alpha, 2, e, false);
  }
  const double n = static_cast<double>(sim.data.n());
  tau /= n;
  CHECK(pop.tau == doctest::Approx(tau).epsilon(0.005));
  CHECK(pop.v_tauX == doctest::Approx(tau2 / n - tau * tau).epsilon(0.02));
  CHECK(pop.noise == doctest::Approx(noise / n).epsilon(0.01));
  CHECK(pop.sigma2 == doctest::Approx(pop.v_tauX + pop.noise));
  CHECK(population_sigma2_Md(dgp, alpha, 2) == pop.sigma2);
  // Treated share matches the mean propensity.
  double e_mean = 0.0;
  for (double e : sim.propensity) e_mean += e;
  CHECK(sim.data.treated_fraction() == doctest::Approx(e_mean / n).epsilon(0.01));
}

TEST_CASE("decomposition identity") {
  for (const auto& name : preset_names()) {
    for (int M : {1, 3}) {
      const Decomposition dec = decomposition_check(preset(name, 2), M, 600, 9 + M);
      CHECK(std::fabs(dec.residual) <= 1e-10);
      CHECK(std::fabs(dec.tau_hat - (dec.tau_bar + dec.E_M + dec.B_M)) <= 1e-10);
    }
  }
  DGPSpec flat = preset("linear-constant-e", 2);
  flat.m1 = 0.0;
  flat.t0 = 0.0;
  flat.t1 = 0.0;
  RngStream rng(2);
  SimulatedData sim = simulate(flat, 300, rng);
  CHECK(decomposition(sim, flat, 2).B_M == 0.0);
  // Remove the noise: E_M is then exactly zero.
  for (std::size_t i = 0; i < sim.data.n(); ++i) {
    sim.data.y[i] -= sim.noise[i];
    sim.noise[i] = 0.0;
  }
  CHECK(decomposition(sim, flat, 2).E_M == 0.0);
}

TEST_CASE("replications replay from their seeds") {
  const DGPSpec dgp = preset("linear-logistic-e", 2);
  ReplicationSettings st;
  st.n = 400;
  st.alpha_Md = 1.280176;
  const CoverageReport rep = clt_coverage_experiment(dgp, st, 40, 123);
  REQUIRE(rep.seeds.size() == 40);
  const ReplicationOutcome again = run_replication(dgp, st, 17, 123);
  CHECK(again.seed == rep.seeds[17]);
  const CoverageReport serial = clt_coverage_experiment(dgp, st, 40, 123, Execution::kSerial);
  CHECK(serial.z_mean == rep.z_mean);
  CHECK(serial.coverage_plugin == rep.coverage_plugin);
  CHECK(rep.band_lo < 0.95);
  CHECK(rep.band_hi > 0.95);
}

TEST_CASE("V^E trend is invariant to worker count") {
  const DGPSpec dgp = preset("linear-constant-e", 2);
  const std::vector<std::size_t> grid{200, 400};
  const auto a = vE_convergence_experiment(dgp, 1, grid, 20, 5, 1.280176, Execution::kParallel);
  const auto b = vE_convergence_experiment(dgp, 1, grid, 20, 5, 1.280176, Execution::kSerial);
  REQUIRE(a.size() == 2);
  CHECK(a[0].mean_v_E == b[0].mean_v_E);
  CHECK(a[1].mean_v_E == b[1].mean_v_E);
  CHECK(a[0].replications == 40);
  CHECK(a[1].replications == 20);
  std::vector<TrendRow> rows(3);
  rows[0].relative_gap = 0.1;
  rows[1].relative_gap = 0.05;
  rows[2].relative_gap = 0.01;
  CHECK(gap_monotone(rows));
  rows[2].relative_gap = 0.2;
  CHECK_FALSE(gap_monotone(rows));
}

TEST_CASE("Kolmogorov distance to the normal") {
  RngStream rng(10);
  std::vector<double> z(20000);
  for (double& v : z) v = rng.normal();
  CHECK(ks_distance_to_normal(z) < 0.015);
  for (double& v : z) v = rng.uniform();
  CHECK(ks_distance_to_normal(z) > 0.3);
}
