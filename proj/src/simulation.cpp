#include "matchvar/simulation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "matchvar/error.hpp"
#include "matchvar/matching.hpp"
#include "matchvar/regression.hpp"

namespace matchvar::simulation {

using nlohmann::json;

void DGPSpec::validate() const {
  if (d < 1) fail(ErrorCode::kInvalidDimension, "DGP dimension must be >= 1");
  if (regression_degree < 1 || regression_degree > 4) {
    fail(ErrorCode::kUnsupportedSpec, "regression degree must lie in [1, 4]");
  }
  if (law == CovariateLaw::kBeta && !(beta_a > 0.0 && beta_b > 0.0)) {
    fail(ErrorCode::kUnsupportedSpec, "Beta covariate parameters must be positive");
  }
  // Propensity and variances are monotone in x_1, so the endpoints bound them.
  for (double x1 : {0.0, 1.0}) {
    std::vector<double> x(static_cast<std::size_t>(d), 0.0);
    x[0] = x1;
    const double e = propensity(x);
    if (!(e > kOverlapBound && e < 1.0 - kOverlapBound)) {
      fail(ErrorCode::kUnsupportedSpec, fmt::format("propensity {} violates overlap on the support", e));
    }
    if (!(variance(0, x) > 0.0) || !(variance(1, x) > 0.0)) {
      fail(ErrorCode::kUnsupportedSpec, "conditional variances must stay positive on the support");
    }
  }
}

double DGPSpec::propensity(std::span<const double> x) const noexcept {
  return logistic_propensity ? regression::logistic(e0 + e1 * x[0]) : e_const;
}

double DGPSpec::mu(int w, std::span<const double> x) const noexcept {
  double s1 = 0.0;
  double s2 = 0.0;
  for (double v : x) {
    s1 += v;
    s2 += v * v;
  }
  const double base = m0 + m1 * s1 + m2 * s2;
  return w == 1 ? base + effect(x) : base;
}

double DGPSpec::effect(std::span<const double> x) const noexcept { return t0 + t1 * x[0] + t2 * x[0] * x[0]; }

double DGPSpec::variance(int w, std::span<const double> x) const noexcept {
  return w == 1 ? s10 + s11 * x[0] : s00 + s01 * x[0];
}

std::vector<std::string> preset_names() {
  return {"linear-constant-e", "linear-logistic-e", "nonlinear-constant-e", "nonlinear-logistic-e"};
}

DGPSpec preset(std::string_view name, int d) {
  DGPSpec s;
  s.name = std::string(name);
  s.d = d;
  const bool nonlinear = name.starts_with("nonlinear-");
  const bool logistic = name.ends_with("-logistic-e");
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    fail(ErrorCode::kUnsupportedSpec, fmt::format("unknown preset '{}'", name));
  }
  s.m1 = 1.0;
  s.t0 = 1.0;
  s.t1 = 1.0;
  if (nonlinear) {
    s.m2 = 1.0;
    s.t2 = 1.0;
    s.regression_degree = 2;
  }
  if (logistic) {
    s.logistic_propensity = true;
    s.e0 = -0.5;
    s.e1 = 1.0;
    s.s10 = 0.5;
    s.s11 = 1.0;
  }
  s.default_seed = 20250101u + static_cast<std::uint64_t>(nonlinear) * 2u + static_cast<std::uint64_t>(logistic);
  s.validate();
  return s;
}

DGPSpec dgp_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& ex) {
    fail(ErrorCode::kParse, fmt::format("DGP config is not valid JSON: {}", ex.what()));
  }
  if (!doc.is_object()) fail(ErrorCode::kParse, "DGP config must be a JSON object");
  const int d = doc.value("d", 2);
  DGPSpec s = doc.contains("preset") ? preset(doc.at("preset").get<std::string>(), d) : DGPSpec{};
  s.d = d;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "preset" || key == "d") continue;
      if (key == "name") s.name = value.get<std::string>();
      else if (key == "law") {
        const auto law = value.get<std::string>();
        if (law == "uniform") s.law = CovariateLaw::kUniform;
        else if (law == "beta") s.law = CovariateLaw::kBeta;
        else fail(ErrorCode::kParse, fmt::format("unknown covariate law '{}'", law));
      }
      else if (key == "beta_a") s.beta_a = value.get<double>();
      else if (key == "beta_b") s.beta_b = value.get<double>();
      else if (key == "logistic_propensity") s.logistic_propensity = value.get<bool>();
      else if (key == "e_const") s.e_const = value.get<double>();
      else if (key == "e0") s.e0 = value.get<double>();
      else if (key == "e1") s.e1 = value.get<double>();
      else if (key == "m0") s.m0 = value.get<double>();
      else if (key == "m1") s.m1 = value.get<double>();
      else if (key == "m2") s.m2 = value.get<double>();
      else if (key == "t0") s.t0 = value.get<double>();
      else if (key == "t1") s.t1 = value.get<double>();
      else if (key == "t2") s.t2 = value.get<double>();
      else if (key == "s00") s.s00 = value.get<double>();
      else if (key == "s01") s.s01 = value.get<double>();
      else if (key == "s10") s.s10 = value.get<double>();
      else if (key == "s11") s.s11 = value.get<double>();
      else if (key == "regression_degree") s.regression_degree = value.get<int>();
      else if (key == "default_seed") s.default_seed = value.get<std::uint64_t>();
      else fail(ErrorCode::kParse, fmt::format("unknown DGP field '{}'", key));
    }
  } catch (const json::exception& ex) {
    fail(ErrorCode::kParse, fmt::format("bad DGP field type: {}", ex.what()));
  }
  s.validate();
  return s;
}

std::string dgp_to_json_text(const DGPSpec& s) {
  const json doc = {{"name", s.name},
                    {"d", s.d},
                    {"law", s.law == CovariateLaw::kBeta ? "beta" : "uniform"},
                    {"beta_a", s.beta_a},
                    {"beta_b", s.beta_b},
                    {"logistic_propensity", s.logistic_propensity},
                    {"e_const", s.e_const},
                    {"e0", s.e0},
                    {"e1", s.e1},
                    {"m0", s.m0},
                    {"m1", s.m1},
                    {"m2", s.m2},
                    {"t0", s.t0},
                    {"t1", s.t1},
                    {"t2", s.t2},
                    {"s00", s.s00},
                    {"s01", s.s01},
                    {"s10", s.s10},
                    {"s11", s.s11},
                    {"regression_degree", s.regression_degree},
                    {"default_seed", s.default_seed}};
  return doc.dump();
}

PopulationMoments population_moments(const DGPSpec& dgp, double alpha, int M) {
  dgp.validate();
  if (!(alpha > 0.0)) fail(ErrorCode::kMissingConstants, "alpha(M, d) must be positive");
  if (M < 1) fail(ErrorCode::kInvalidArgument, "M must be >= 1");
  using Gauss = boost::math::quadrature::gauss<double, 30>;
  constexpr int kPanels = 16;
  const boost::math::beta_distribution<double> beta(dgp.beta_a, dgp.beta_b);
  std::vector<double> x(static_cast<std::size_t>(dgp.d), 0.0);
  double mass = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;
  double noise = 0.0;
  for (int p = 0; p < kPanels; ++p) {
    const double a = static_cast<double>(p) / kPanels;
    const double b = static_cast<double>(p + 1) / kPanels;
    const auto f = [&](double t) {
      x[0] = t;
      const double pdf = dgp.law == CovariateLaw::kBeta ? boost::math::pdf(beta, t) : 1.0;
      const double tau = dgp.effect(x);
      const double e = dgp.propensity(x);
      return std::array<double, 4>{
          pdf, pdf * tau, pdf * tau * tau,
          pdf * (dgp.variance(1, x) * matching::variance_weight(alpha, M, e, true) +
                 dgp.variance(0, x) * matching::variance_weight(alpha, M, e, false))};
    };
    const auto& nodes = Gauss::abscissa();
    const auto& weights = Gauss::weights();
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      for (double sign : {-1.0, 1.0}) {
        if (sign > 0.0 && nodes[q] == 0.0) continue;
        const double t = 0.5 * (a + b) + sign * 0.5 * (b - a) * nodes[q];
        const double wq = 0.5 * (b - a) * weights[q];
        const auto v = f(t);
        mass += wq * v[0];
        m1 += wq * v[1];
        m2 += wq * v[2];
        noise += wq * v[3];
      }
    }
  }
  PopulationMoments out;
  out.tau = m1 / mass;
  out.v_tauX = std::max(0.0, m2 / mass - out.tau * out.tau);
  out.noise = noise / mass;
  out.sigma2 = out.v_tauX + out.noise;
  return out;
}

double population_sigma2_Md(const DGPSpec& dgp, double alpha, int M) {
  return population_moments(dgp, alpha, M).sigma2;
}

SimulatedData simulate(const DGPSpec& dgp, std::size_t n, RngStream& rng, std::size_t min_group) {
  dgp.validate();
  if (n < 2 * min_group) fail(ErrorCode::kInsufficientGroup, "sample too small for the requested group sizes");
  SimulatedData sim;
  sim.data.x = PointSet(dgp.d);
  sim.data.x.resize(n);
  std::gamma_distribution<double> ga(dgp.beta_a, 1.0);
  std::gamma_distribution<double> gb(dgp.beta_b, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& c : sim.data.x.mutable_point(i)) {
      if (dgp.law == CovariateLaw::kUniform) {
        c = rng.uniform();
      } else {
        const double u = ga(rng.engine());
        const double v = gb(rng.engine());
        c = u / (u + v);
      }
    }
  }
  sim.propensity.resize(n);
  for (std::size_t i = 0; i < n; ++i) sim.propensity[i] = dgp.propensity(sim.data.x[i]);
  sim.data.w.resize(n);
  for (;;) {
    std::size_t treated = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sim.data.w[i] = rng.uniform() < sim.propensity[i] ? 1 : 0;
      treated += static_cast<std::size_t>(sim.data.w[i]);
    }
    if (treated >= min_group && n - treated >= min_group) break;
  }
  sim.mu0.resize(n);
  sim.mu1.resize(n);
  sim.sigma2_0.resize(n);
  sim.sigma2_1.resize(n);
  sim.noise.resize(n);
  sim.data.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = sim.data.x[i];
    sim.mu0[i] = dgp.mu(0, x);
    sim.mu1[i] = dgp.mu(1, x);
    sim.sigma2_0[i] = dgp.variance(0, x);
    sim.sigma2_1[i] = dgp.variance(1, x);
    const int w = sim.data.w[i];
    sim.noise[i] = std::sqrt(w == 1 ? sim.sigma2_1[i] : sim.sigma2_0[i]) * rng.normal();
    sim.data.y[i] = (w == 1 ? sim.mu1[i] : sim.mu0[i]) + sim.noise[i];
  }
  return sim;
}

namespace {

Decomposition decompose(const SimulatedData& sim, const matching::MatchResult& matches, double tau_hat) {
  const Dataset& data = sim.data;
  const std::size_t n = data.n();
  std::vector<double> bar(n);
  std::vector<double> em(n);
  std::vector<double> bm(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool treated = data.w[i] == 1;
    const double sign = treated ? 1.0 : -1.0;
    bar[i] = sim.mu1[i] - sim.mu0[i];
    em[i] = sign * (1.0 + static_cast<double>(matches.times_used[i]) / matches.M) * sim.noise[i];
    const std::vector<double>& opposite = treated ? sim.mu0 : sim.mu1;
    double s = 0.0;
    for (std::size_t j : matches.matches_of(i)) s += opposite[i] - opposite[j];
    bm[i] = sign * s / matches.M;
  }
  const double dn = static_cast<double>(n);
  Decomposition dec;
  dec.tau_hat = tau_hat;
  dec.tau_bar = pairwise_sum(bar) / dn;
  dec.E_M = pairwise_sum(em) / dn;
  dec.B_M = pairwise_sum(bm) / dn;
  dec.residual = dec.tau_hat - dec.tau_bar - dec.E_M - dec.B_M;
  return dec;
}

std::size_t min_group_for(const DGPSpec& dgp, int M) {
  return static_cast<std::size_t>(std::max({M, 3, regression::basis_size(dgp.d, dgp.regression_degree) + 1}));
}

}  // namespace

Decomposition decomposition(const SimulatedData& sim, const DGPSpec& dgp, int M) {
  const auto matches = matching::find_matches(sim.data, M, Execution::kSerial);
  Decomposition dec = decompose(sim, matches, matching::tau_hat(sim.data, matches));
  // The population effect does not involve alpha; any positive value works.
  dec.tau = population_moments(dgp, 1.0, 1).tau;
  return dec;
}

Decomposition decomposition_check(const DGPSpec& dgp, int M, std::size_t n, std::uint64_t seed) {
  RngStream rng(seed);
  const SimulatedData sim = simulate(dgp, n, rng, min_group_for(dgp, M));
  return decomposition(sim, dgp, M);
}

ReplicationOutcome run_replication(const DGPSpec& dgp, const ReplicationSettings& st, std::int64_t rep,
                                   std::uint64_t seed) {
  const PopulationMoments pop = population_moments(dgp, st.alpha_Md, st.M);
  ReplicationOutcome out;
  out.rep = rep;
  out.seed = derive_seed(seed, static_cast<std::uint64_t>(rep));
  RngStream rng(out.seed);
  const SimulatedData sim = simulate(dgp, st.n, rng, min_group_for(dgp, st.M));
  const Dataset& data = sim.data;
  const auto matches = matching::find_matches(data, st.M, Execution::kSerial);
  out.tau_hat = matching::tau_hat(data, matches);
  out.B_hat = matching::bias_correction(data, matches, {dgp.regression_degree});
  out.tau_bc = out.tau_hat - out.B_hat;
  const Decomposition dec = decompose(sim, matches, out.tau_hat);
  out.tau_bar = dec.tau_bar;
  out.E_M = dec.E_M;
  out.B_M = dec.B_M;

  std::vector<double> own(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) own[i] = data.w[i] == 1 ? sim.sigma2_1[i] : sim.sigma2_0[i];
  out.v_E_oracle = matching::v_E(matches, own);

  const double dn = static_cast<double>(data.n());
  const double oracle_sd = std::sqrt(pop.sigma2);
  out.z_oracle = std::sqrt(dn) * (out.tau_bc - pop.tau) / oracle_sd;
  const auto ci = matching::confidence_interval(out.tau_bc, pop.sigma2, data.n(), st.level);
  out.covered_oracle = ci.lo <= pop.tau && pop.tau <= ci.hi;

  if (st.plugin) {
    matching::SigmaSpec sigma;
    sigma.method = matching::SigmaMethod::kNearestNeighbor;
    const auto vc = matching::sigma2_Md_plugin(data, matches, st.alpha_Md, {}, sigma, {});
    out.v_E_plugin = vc.v_E;
    out.sigma2_plugin = vc.sigma2;
    const auto pci = matching::confidence_interval(out.tau_bc, vc.sigma2, data.n(), st.level);
    out.covered_plugin = pci.lo <= pop.tau && pop.tau <= pci.hi;
  }
  return out;
}

std::vector<TrendRow> vE_convergence_experiment(const DGPSpec& dgp, int M, std::span<const std::size_t> n_grid,
                                                std::int64_t replications, std::uint64_t seed, double alpha,
                                                Execution exec) {
  if (n_grid.empty()) fail(ErrorCode::kEmptyInput, "sample-size grid is empty");
  if (replications < 2) fail(ErrorCode::kInvalidArgument, "at least two replications are required");
  const PopulationMoments pop = population_moments(dgp, alpha, M);
  const std::size_t n_max = *std::max_element(n_grid.begin(), n_grid.end());
  std::vector<TrendRow> rows;
  for (std::size_t g = 0; g < n_grid.size(); ++g) {
    const std::size_t n = n_grid[g];
    const auto reps = static_cast<std::int64_t>(
        std::ceil(static_cast<double>(replications) * static_cast<double>(n_max) / static_cast<double>(n)));
    std::vector<double> values(static_cast<std::size_t>(reps));
    const std::uint64_t row_seed = derive_seed(seed, n);
    parallel_for(exec, reps, [&](std::int64_t rep) {
      RngStream rng(derive_seed(row_seed, static_cast<std::uint64_t>(rep)));
      const SimulatedData sim = simulate(dgp, n, rng, min_group_for(dgp, M));
      const auto matches = matching::find_matches(sim.data, M, Execution::kSerial);
      std::vector<double> own(n);
      for (std::size_t i = 0; i < n; ++i) own[i] = sim.data.w[i] == 1 ? sim.sigma2_1[i] : sim.sigma2_0[i];
      values[static_cast<std::size_t>(rep)] = matching::v_E(matches, own);
    });
    const JackknifeSummary js = jackknife_mean(values);
    TrendRow row;
    row.n = n;
    row.replications = reps;
    row.mean_v_E = js.mean;
    row.se = js.standard_error;
    row.limit = pop.noise;
    row.relative_gap = std::fabs(js.mean - pop.noise) / pop.noise;
    rows.push_back(row);
  }
  return rows;
}

bool gap_monotone(std::span<const TrendRow> rows) noexcept {
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (!(rows[r].relative_gap < rows[r - 1].relative_gap)) return false;
  }
  return true;
}

double ks_distance_to_normal(std::vector<double> z) {
  if (z.empty()) fail(ErrorCode::kEmptyInput, "KS distance of an empty sample");
  std::sort(z.begin(), z.end());
  const boost::math::normal_distribution<double> normal;
  const double n = static_cast<double>(z.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double F = boost::math::cdf(normal, z[i]);
    worst = std::max({worst, (static_cast<double>(i) + 1.0) / n - F, F - static_cast<double>(i) / n});
  }
  return worst;
}

CoverageReport clt_coverage_experiment(const DGPSpec& dgp, const ReplicationSettings& settings,
                                       std::int64_t replications, std::uint64_t seed, Execution exec) {
  if (replications < 2) fail(ErrorCode::kInvalidArgument, "at least two replications are required");
  std::vector<ReplicationOutcome> outcomes(static_cast<std::size_t>(replications));
  parallel_for(exec, replications, [&](std::int64_t rep) {
    outcomes[static_cast<std::size_t>(rep)] = run_replication(dgp, settings, rep, seed);
  });
  CoverageReport rep;
  rep.replications = replications;
  rep.level = settings.level;
  rep.seed = seed;
  rep.sigma2_population = population_sigma2_Md(dgp, settings.alpha_Md, settings.M);
  std::vector<double> z(outcomes.size());
  double hits_oracle = 0.0;
  double hits_plugin = 0.0;
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    z[r] = outcomes[r].z_oracle;
    hits_oracle += outcomes[r].covered_oracle;
    hits_plugin += outcomes[r].covered_plugin;
    rep.seeds.push_back(outcomes[r].seed);
  }
  const double R = static_cast<double>(replications);
  rep.coverage_oracle = hits_oracle / R;
  rep.coverage_plugin = settings.plugin ? hits_plugin / R : 0.0;
  const double band = 3.0 * std::sqrt(settings.level * (1.0 - settings.level) / R);
  rep.band_lo = settings.level - band;
  rep.band_hi = settings.level + band;
  rep.z_mean = pairwise_sum(z) / R;
  std::vector<double> sq(z.size());
  for (std::size_t r = 0; r < z.size(); ++r) sq[r] = (z[r] - rep.z_mean) * (z[r] - rep.z_mean);
  rep.z_var = pairwise_sum(sq) / (R - 1.0);
  rep.ks_distance = ks_distance_to_normal(z);
  return rep;
}

}  // namespace matchvar::simulation
