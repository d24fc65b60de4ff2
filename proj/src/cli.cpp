#include "matchvar/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>

#include "matchvar/constants.hpp"
#include "matchvar/constants_io.hpp"
#include "matchvar/dataset.hpp"
#include "matchvar/error.hpp"
#include "matchvar/matching.hpp"
#include "matchvar/parallel.hpp"
#include "matchvar/simulation.hpp"
#include "matchvar/voronoi_mc.hpp"

namespace matchvar::cli {

using nlohmann::json;
namespace cst = matchvar::constants;

namespace {

// Raised for failed experiment assertions (exit 5) and method mismatches (exit 3).
struct ExitRequest {
  int code;
  std::string message;
};

std::string now_iso8601() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                                   std::chrono::system_clock::now())));
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, fmt::format("cannot read '{}'", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_record(const std::string& path, const json& record) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, fmt::format("cannot write '{}'", path));
  out << record.dump(2) << '\n';
  if (!out) fail(ErrorCode::kIo, fmt::format("write to '{}' failed", path));
}

json parse_config(const std::string& path) {
  try {
    json doc = json::parse(read_text(path));
    if (!doc.is_object()) fail(ErrorCode::kParse, "config must be a JSON object");
    return doc;
  } catch (const json::parse_error& ex) {
    fail(ErrorCode::kParse, fmt::format("config '{}' is not valid JSON: {}", path, ex.what()));
  }
}

template <typename T>
void take(const json& cfg, const char* key, T& target, bool flag_given) {
  if (flag_given || !cfg.contains(key)) return;
  try {
    target = cfg.at(key).get<T>();
  } catch (const json::exception& ex) {
    fail(ErrorCode::kParse, fmt::format("config field '{}': {}", key, ex.what()));
  }
}

std::string format_value(const cst::ConstantEstimate& e) {
  if (e.method == cst::Method::kClosedForm) return fmt::format("{:g}", e.value);
  return fmt::format("{:.5f} ({:.1e})", e.value, e.error_bound);
}

cst::ConstantsTable load_or_empty(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return {};
  return cst::load_constants(path);
}

// alpha(M, d) for experiments: d = 1 closed form, else the cache, else a
// fresh quadrature run (not stored).
cst::ConstantEstimate resolve_alpha(int M, int d, const cst::ConstantsTable& table) {
  try {
    return cst::alpha_Md(M, d, table);
  } catch (const Error& ex) {
    if (ex.code() != ErrorCode::kMissingConstants) throw;
  }
  return M == 1 ? cst::alpha_d_quadrature(d, {}) : cst::alpha_Md_quadrature(M, d, {});
}

// ---------------------------------------------------------------- constants

struct ConstantsArgs {
  std::vector<int> d;
  std::vector<int> M{1};
  std::string method = "all";
  std::int64_t samples = 10'000'000;
  std::optional<std::uint64_t> seed;
  std::string cache = cst::default_cache_path().string();
  bool recompute = false;
  int grid = 256;
  int refine = 1;
};

int cmd_constants(const ConstantsArgs& a, std::ostream& out) {
  std::vector<int> ds = a.d;
  if (ds.empty()) {
    for (int d = 1; d <= 10; ++d) ds.push_back(d);
  }
  std::vector<cst::Method> methods;
  if (a.method == "mc") methods = {cst::Method::kMonteCarlo};
  if (a.method == "quadrature") methods = {cst::Method::kQuadrature};
  if (a.method == "closed-form") methods = {cst::Method::kClosedForm};
  if (a.method == "all") methods = {cst::Method::kClosedForm, cst::Method::kQuadrature, cst::Method::kMonteCarlo};
  const bool explicit_method = a.method != "all";
  for (int d : ds) {
    if (explicit_method && d == 1 && methods[0] == cst::Method::kQuadrature) {
      throw ExitRequest{kExitMethodMismatch, "quadrature is not defined for d = 1 (the angle law is discrete); use "
                                             "--method closed-form"};
    }
    if (explicit_method && d >= 2 && methods[0] == cst::Method::kClosedForm) {
      throw ExitRequest{kExitMethodMismatch,
                        fmt::format("no closed form exists for d = {}; use --method quadrature or mc", d)};
    }
  }

  cst::ConstantsTable table = load_or_empty(a.cache);
  bool changed = false;
  const cst::GridSpec grid{a.grid, a.refine};

  for (cst::Method method : methods) {
    std::vector<int> cols;
    for (int d : ds) {
      if (method == cst::Method::kQuadrature && d == 1) continue;
      if (method == cst::Method::kClosedForm && d >= 2) continue;
      cols.push_back(d);
    }
    if (cols.empty()) continue;
    std::map<std::pair<int, int>, cst::ConstantEstimate> cells;
    for (int M : a.M) {
      for (int d : cols) {
        const cst::Kind kind = M == 1 ? cst::Kind::kAlphaD : cst::Kind::kAlphaMd;
        const int m_key = M == 1 ? 0 : M;
        std::optional<cst::ConstantEstimate> cached = table.find(kind, method, d, m_key);
        cst::ConstantEstimate e;
        if (method == cst::Method::kClosedForm) {
          e = cst::alpha_Md(M, 1, table);
          e.kind = kind;
          e.M = m_key;
        } else if (method == cst::Method::kQuadrature) {
          const int resolution = 20 * ((grid.base_resolution + 19) / 20) * (1 << grid.refinement_depth);
          if (cached && !a.recompute && cached->sample_size == resolution) {
            e = *cached;
          } else {
            e = M == 1 ? cst::alpha_d_quadrature(d, grid) : cst::alpha_Md_quadrature(M, d, grid);
          }
        } else {
          const bool reusable = cached && !a.recompute &&
                                (!a.seed || (cached->seed == a.seed && cached->sample_size == a.samples));
          if (reusable) {
            e = *cached;
          } else {
            if (!a.seed) {
              fail(ErrorCode::kInvalidArgument,
                   fmt::format("no cached Monte Carlo value for M = {}, d = {}; pass --seed to compute one", M, d));
            }
            const cst::MonteCarloOptions opts{a.samples, *a.seed, Execution::kParallel};
            e = M == 1 ? cst::alpha_d_monte_carlo(d, opts) : cst::alpha_Md_monte_carlo(M, d, opts);
          }
        }
        if (!cached || !(*cached == e)) {
          table.put(e);
          changed = true;
        }
        cells.emplace(std::make_pair(M, d), e);
      }
    }
    out << fmt::format("alpha(M, d) by {} (error bound in parentheses)\n", cst::to_string(method));
    out << fmt::format("{:<8}", "");
    for (int d : cols) out << fmt::format("{:>22}", fmt::format("d = {}", d));
    out << '\n';
    for (int M : a.M) {
      out << fmt::format("{:<8}", fmt::format("M = {}", M));
      for (int d : cols) out << fmt::format("{:>22}", format_value(cells.at({M, d})));
      out << '\n';
    }
    out << "published\n";
    for (int M : a.M) {
      out << fmt::format("{:<8}", fmt::format("M = {}", M));
      for (int d : cols) {
        const auto r = cst::reference_alpha_Md(M, d);
        out << fmt::format("{:>22}", r ? fmt::format("{:g}", *r) : std::string("-"));
      }
      out << '\n';
    }
    out << '\n';
  }
  if (changed) {
    table.created = now_iso8601();
    table.tool_version = MATCHVAR_VERSION;
    cst::store_constants(table, a.cache);
    out << fmt::format("cache updated: {}\n", a.cache);
  }
  return kExitOk;
}

// ----------------------------------------------------------------- estimate

struct EstimateArgs {
  std::string input;
  int M = 1;
  bool no_bias_correction = false;
  bool no_ci = false;
  double level = 0.95;
  std::string cache = cst::default_cache_path().string();
  bool compute_constants = false;
  int J_var = 2;
  std::string propensity = "logistic";
  int degree = 1;
  std::string out_path;
};

json components_json(const matching::VarianceComponents& vc) {
  return {{"V_E", vc.v_E}, {"V_tauX", vc.v_tauX}, {"V_M", vc.v_M}, {"sigma2_Md", vc.sigma2}, {"alpha_Md", vc.alpha_Md}};
}

int cmd_estimate(const EstimateArgs& a, std::ostream& out) {
  const Dataset data = read_csv(a.input);
  data.validate();
  matching::EstimateOptions opts;
  opts.M = a.M;
  opts.bias_correct = !a.no_bias_correction;
  opts.regression.degree = a.degree;
  opts.with_variance = !a.no_ci;
  opts.level = a.level;
  opts.sigma.J_var = a.J_var;
  if (a.propensity == "logistic") opts.propensity.method = matching::PropensityMethod::kLogistic;
  if (a.propensity == "knn") opts.propensity.method = matching::PropensityMethod::kKnn;
  if (a.propensity == "constant") opts.propensity.method = matching::PropensityMethod::kConstant;

  if (std::min(data.n0(), data.n1()) < static_cast<std::size_t>(a.M)) {
    fail(ErrorCode::kInsufficientGroup, fmt::format("M = {} exceeds a group size (n0 = {}, n1 = {})", a.M,
                                                    data.n0(), data.n1()));
  }

  cst::ConstantsTable table;
  if (opts.with_variance) {
    table = load_or_empty(a.cache);
    bool have = true;
    try {
      cst::alpha_Md(a.M, data.d(), table);
    } catch (const Error& ex) {
      if (ex.code() != ErrorCode::kMissingConstants) throw;
      have = false;
    }
    if (!have) {
      if (!a.compute_constants) {
        fail(ErrorCode::kMissingConstants,
             fmt::format("cache '{}' has no alpha(M={}, d={}); pass --compute-constants", a.cache, a.M, data.d()));
      }
      table.put(a.M == 1 ? cst::alpha_d_quadrature(data.d(), {}) : cst::alpha_Md_quadrature(a.M, data.d(), {}));
      table.created = now_iso8601();
      cst::store_constants(table, a.cache);
    }
  }

  const matching::EstimateReport rep = matching::estimate(data, opts, opts.with_variance ? &table : nullptr);
  out << fmt::format("matching estimate: M = {}, d = {}, n = {} (n0 = {}, n1 = {})\n", rep.M, rep.d, rep.n, rep.n0,
                     rep.n1);
  out << fmt::format("{:<12}{:.12g}\n", "tau_hat", rep.tau_hat);
  if (opts.bias_correct) {
    out << fmt::format("{:<12}{:.12g}\n", "B_hat", rep.B_hat);
    out << fmt::format("{:<12}{:.12g}\n", "tau_bc", rep.tau_bc);
  }
  json results = {{"tau_hat", rep.tau_hat}, {"B_hat", rep.B_hat}, {"tau_bc", rep.tau_bc}};
  if (rep.variance) {
    const auto& vc = *rep.variance;
    out << fmt::format("{:<12}{:.12g}\n", "V_E", vc.v_E);
    out << fmt::format("{:<12}{:.12g}\n", "V_tauX", vc.v_tauX);
    out << fmt::format("{:<12}{:.12g}\n", "sigma2_Md", vc.sigma2);
    out << fmt::format("{:<12}{:.12g} ({})\n", "alpha_Md", rep.alpha->value, cst::to_string(rep.alpha->method));
    out << fmt::format("{:<12}[{:.12g}, {:.12g}]\n", fmt::format("CI {:g}%", 100.0 * rep.level), rep.ci->lo,
                       rep.ci->hi);
    results["variance"] = components_json(vc);
    results["ci"] = {{"level", rep.level}, {"lo", rep.ci->lo}, {"hi", rep.ci->hi}};
  }
  if (!a.out_path.empty()) {
    const json record = {{"tool_version", MATCHVAR_VERSION},
                         {"subcommand", "estimate"},
                         {"config",
                          {{"input", a.input},
                           {"M", a.M},
                           {"bias_correction", opts.bias_correct},
                           {"degree", a.degree},
                           {"ci", opts.with_variance},
                           {"level", a.level},
                           {"J_var", a.J_var},
                           {"propensity", a.propensity},
                           {"cache", a.cache}}},
                         {"data", {{"n", rep.n}, {"n0", rep.n0}, {"n1", rep.n1}, {"d", rep.d}}},
                         {"results", results}};
    write_record(a.out_path, record);
  }
  return kExitOk;
}

// ----------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string preset;
  std::string config;
  std::string check;
  int M = 1;
  int d = 2;
  std::size_t n = 1000;
  std::int64_t reps = 2000;
  std::vector<std::size_t> n_grid{500, 1000, 2000, 4000};
  double level = 0.95;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> replay;
  std::string cache = cst::default_cache_path().string();
  std::string out_path;
};

int cmd_simulate(SimulateArgs a, const CLI::App& sc, std::ostream& out) {
  json cfg = json::object();
  if (!a.config.empty()) cfg = parse_config(a.config);
  auto given = [&](const char* flag) { return sc.count(flag) > 0; };
  take(cfg, "preset", a.preset, given("--preset"));
  take(cfg, "check", a.check, given("--check"));
  take(cfg, "M", a.M, given("--M"));
  take(cfg, "d", a.d, given("--d"));
  take(cfg, "n", a.n, given("--n"));
  take(cfg, "reps", a.reps, given("--reps"));
  take(cfg, "n_grid", a.n_grid, given("--n-grid"));
  take(cfg, "level", a.level, given("--level"));
  if (!given("--seed") && cfg.contains("seed")) a.seed = cfg.at("seed").get<std::uint64_t>();

  simulation::DGPSpec dgp;
  if (cfg.contains("dgp")) {
    json dj = cfg.at("dgp");
    if (!a.preset.empty() && !dj.contains("preset")) dj["preset"] = a.preset;
    if (!dj.contains("d")) dj["d"] = a.d;
    dgp = simulation::dgp_from_json_text(dj.dump());
  } else if (!a.preset.empty()) {
    dgp = simulation::preset(a.preset, a.d);
  } else {
    fail(ErrorCode::kInvalidArgument, "simulate needs --preset or a config with a dgp section");
  }
  if (a.check.empty() && !a.replay) a.check = "coverage";
  const std::uint64_t seed = a.seed.value_or(dgp.default_seed);
  const cst::ConstantsTable table = load_or_empty(a.cache);
  const cst::ConstantEstimate alpha = resolve_alpha(a.M, dgp.d, table);
  const json assertions = cfg.value("assert", json::object());

  json config = {{"dgp", json::parse(simulation::dgp_to_json_text(dgp))},
                 {"M", a.M},
                 {"n", a.n},
                 {"reps", a.reps},
                 {"level", a.level},
                 {"seed", seed},
                 {"alpha_Md", alpha.value}};
  json results;
  bool passed = true;
  std::string failure;

  simulation::ReplicationSettings st;
  st.M = a.M;
  st.n = a.n;
  st.level = a.level;
  st.alpha_Md = alpha.value;

  if (a.replay) {
    const auto r = simulation::run_replication(dgp, st, *a.replay, seed);
    out << fmt::format("replication {} (seed {})\n", r.rep, r.seed);
    out << fmt::format("{:<16}{:.12g}\n{:<16}{:.12g}\n{:<16}{:.12g}\n", "tau_hat", r.tau_hat, "B_hat", r.B_hat,
                       "tau_bc", r.tau_bc);
    out << fmt::format("{:<16}{:.12g}\n{:<16}{:.12g}\n", "V_E oracle", r.v_E_oracle, "V_E plug-in", r.v_E_plugin);
    out << fmt::format("{:<16}{:.12g}\n{:<16}{:.12g}\n{:<16}{:.12g}\n", "tau_bar", r.tau_bar, "E_M", r.E_M, "B_M",
                       r.B_M);
    out << fmt::format("{:<16}{:.12g}\n{:<16}{}\n{:<16}{}\n", "z (oracle)", r.z_oracle, "covered oracle",
                       r.covered_oracle, "covered plug-in", r.covered_plugin);
    results = {{"rep", r.rep},           {"seed", r.seed},         {"tau_hat", r.tau_hat},
               {"B_hat", r.B_hat},       {"tau_bc", r.tau_bc},     {"v_E_oracle", r.v_E_oracle},
               {"v_E_plugin", r.v_E_plugin}, {"tau_bar", r.tau_bar}, {"E_M", r.E_M},
               {"B_M", r.B_M},           {"z_oracle", r.z_oracle}, {"covered_oracle", r.covered_oracle},
               {"covered_plugin", r.covered_plugin}};
  } else if (a.check == "coverage") {
    const auto rep = simulation::clt_coverage_experiment(dgp, st, a.reps, seed);
    const double lo = assertions.value("coverage_lo", rep.band_lo);
    const double hi = assertions.value("coverage_hi", rep.band_hi);
    out << fmt::format("coverage check: {} replications, n = {}, M = {}, level {:g}\n", rep.replications, a.n, a.M,
                       a.level);
    out << fmt::format("{:<22}{:.6g}\n", "population sigma2", rep.sigma2_population);
    out << fmt::format("{:<22}{:.4f}  (band [{:.4f}, {:.4f}])\n", "coverage (oracle)", rep.coverage_oracle, lo, hi);
    out << fmt::format("{:<22}{:.4f}\n", "coverage (plug-in)", rep.coverage_plugin);
    out << fmt::format("{:<22}{:.4f}\n{:<22}{:.4f}\n{:<22}{:.4f}\n", "z mean", rep.z_mean, "z variance", rep.z_var,
                       "KS distance", rep.ks_distance);
    passed = rep.coverage_oracle >= lo && rep.coverage_oracle <= hi;
    if (assertions.contains("z_var_tolerance")) {
      passed = passed && std::fabs(rep.z_var - 1.0) <= assertions.at("z_var_tolerance").get<double>();
    }
    if (!passed) failure = "oracle coverage outside its band";
    results = {{"coverage_oracle", rep.coverage_oracle}, {"coverage_plugin", rep.coverage_plugin},
               {"band", {lo, hi}},                       {"z_mean", rep.z_mean},
               {"z_var", rep.z_var},                     {"ks_distance", rep.ks_distance},
               {"sigma2_population", rep.sigma2_population}, {"seeds", rep.seeds}};
  } else if (a.check == "vE") {
    const auto rows = simulation::vE_convergence_experiment(dgp, a.M, a.n_grid, a.reps, seed, alpha.value);
    out << fmt::format("V^E convergence (oracle variances), M = {}, d = {}\n", a.M, dgp.d);
    out << fmt::format("{:>8}{:>8}{:>14}{:>12}{:>12}{:>12}\n", "n", "reps", "mean V^E", "se", "limit", "gap");
    json jr = json::array();
    for (const auto& r : rows) {
      out << fmt::format("{:>8}{:>8}{:>14.6f}{:>12.2e}{:>12.6f}{:>11.3f}%\n", r.n, r.replications, r.mean_v_E, r.se,
                         r.limit, 100.0 * r.relative_gap);
      jr.push_back({{"n", r.n}, {"reps", r.replications}, {"mean_v_E", r.mean_v_E}, {"se", r.se},
                    {"limit", r.limit}, {"relative_gap", r.relative_gap}});
    }
    const double max_gap = assertions.value("max_relative_gap", 0.03);
    passed = rows.back().relative_gap <= max_gap;
    if (!passed) failure = fmt::format("gap at the largest n exceeds {:g}", max_gap);
    if (assertions.value("monotone", false) && !simulation::gap_monotone(rows)) {
      passed = false;
      failure = "gap is not monotone in n";
    }
    results = {{"rows", jr}, {"monotone", simulation::gap_monotone(rows)}};
  } else if (a.check == "decomposition") {
    const auto dec = simulation::decomposition_check(dgp, a.M, a.n, seed);
    out << fmt::format("{:<10}{:.12g}\n{:<10}{:.12g}\n{:<10}{:.12g}\n{:<10}{:.12g}\n{:<10}{:.3e}\n", "tau_hat",
                       dec.tau_hat, "tau_bar", dec.tau_bar, "E_M", dec.E_M, "B_M", dec.B_M, "residual", dec.residual);
    const double tol = assertions.value("max_residual", 1e-10);
    passed = std::fabs(dec.residual) <= tol;
    if (!passed) failure = "decomposition residual too large";
    results = {{"tau_hat", dec.tau_hat}, {"tau_bar", dec.tau_bar}, {"E_M", dec.E_M},
               {"B_M", dec.B_M},         {"residual", dec.residual}};
  } else {
    fail(ErrorCode::kInvalidArgument, fmt::format("unknown check '{}'", a.check));
  }
  out << (passed ? "PASS\n" : fmt::format("FAIL: {}\n", failure));
  if (!a.out_path.empty()) {
    write_record(a.out_path, {{"tool_version", MATCHVAR_VERSION},
                              {"subcommand", "simulate"},
                              {"check", a.replay ? "replay" : a.check},
                              {"config", config},
                              {"results", results},
                              {"passed", passed}});
  }
  if (!passed) throw ExitRequest{kExitAssertion, failure};
  return kExitOk;
}

// ------------------------------------------------------------------- verify

struct VerifyArgs {
  std::string experiment;
  std::string config;
  std::string density = "uniform_torus";
  double ratio = 1.0;
  int M = 1;
  int d = 2;
  int n = 2000;
  std::int64_t reps = 1000;
  std::int64_t probes = 0;
  std::vector<double> v{0.001};
  std::int64_t samples = 1'000'000;
  std::vector<int> n_grid{250, 500, 1000, 2000};
  double tolerance = -1.0;
  std::optional<std::uint64_t> seed;
  std::string cache = cst::default_cache_path().string();
  std::string out_path;
};

voronoi::DensityPairSpec make_density(const std::string& kind, int d, double ratio) {
  switch (voronoi::parse_support_kind(kind)) {
    case voronoi::SupportKind::kUniformTorus: return voronoi::uniform_torus(d);
    case voronoi::SupportKind::kUniformCube: return voronoi::uniform_cube(d);
    case voronoi::SupportKind::kPiecewiseProduct: return voronoi::piecewise_product(d, ratio);
  }
  fail(ErrorCode::kUnsupportedSpec, "unknown density pair");
}

json moment_json(const voronoi::MomentEstimate& m) {
  return {{"n", m.n},
          {"M", m.M},
          {"d", m.d},
          {"replications", m.replications},
          {"probes", m.probes},
          {"seed", m.seed},
          {"first_moment", m.first_moment},
          {"first_se", m.first_se},
          {"second_moment", m.second_moment},
          {"second_se", m.second_se}};
}

int cmd_verify(VerifyArgs a, const CLI::App& sc, std::ostream& out) {
  json cfg = json::object();
  if (!a.config.empty()) cfg = parse_config(a.config);
  auto given = [&](const char* flag) { return sc.count(flag) > 0; };
  take(cfg, "experiment", a.experiment, given("--experiment"));
  take(cfg, "density", a.density, given("--density"));
  take(cfg, "ratio", a.ratio, given("--ratio"));
  take(cfg, "M", a.M, given("--M"));
  take(cfg, "d", a.d, given("--d"));
  take(cfg, "n", a.n, given("--n"));
  take(cfg, "reps", a.reps, given("--reps"));
  take(cfg, "probes", a.probes, given("--probes"));
  take(cfg, "v", a.v, given("--v"));
  take(cfg, "samples", a.samples, given("--samples"));
  take(cfg, "n_grid", a.n_grid, given("--n-grid"));
  take(cfg, "tolerance", a.tolerance, given("--tolerance"));
  if (!given("--seed") && cfg.contains("seed")) a.seed = cfg.at("seed").get<std::uint64_t>();
  if (a.experiment.empty()) fail(ErrorCode::kInvalidArgument, "verify needs --experiment");
  if (!a.seed) fail(ErrorCode::kInvalidArgument, "verify is stochastic and needs --seed");

  const voronoi::DensityPairSpec spec = make_density(a.density, a.d, a.ratio);
  const double ratio = spec.density_ratio();
  const cst::ConstantsTable table = load_or_empty(a.cache);
  json config = {{"experiment", a.experiment}, {"density", a.density}, {"ratio", ratio}, {"M", a.M},
                 {"d", a.d},                   {"seed", *a.seed}};
  json results;
  bool passed = true;
  std::string failure;

  if (a.experiment == "thm31") {
    const double tol = a.tolerance > 0.0 ? a.tolerance : 0.05;
    const cst::ConstantEstimate alpha = resolve_alpha(a.M, a.d, table);
    voronoi::ExperimentOptions opts;
    opts.M = a.M;
    opts.n = a.n;
    opts.replications = a.reps;
    opts.probes = a.probes;
    opts.seed = *a.seed;
    const auto m = voronoi::theorem31_experiment(spec, opts);
    const double first_target = a.M * ratio;
    const double second_target = alpha.value * ratio * ratio;
    out << fmt::format("catchment moments: {}, M = {}, d = {}, n = {}, {} replications x {} probes\n", a.density,
                       a.M, a.d, a.n, m.replications, m.probes);
    out << fmt::format("{:<16}{:.5f} ({:.1e})   limit {:.5f}\n", "n E[nu]", m.first_moment, m.first_se,
                       first_target);
    out << fmt::format("{:<16}{:.5f} ({:.1e})   limit {:.5f}\n", "n^2 E[nu^2]", m.second_moment, m.second_se,
                       second_target);
    passed = std::fabs(m.first_moment - first_target) <= tol * first_target &&
             std::fabs(m.second_moment - second_target) <= tol * second_target;
    if (!passed) failure = fmt::format("moment outside {:g}% of its limit", 100.0 * tol);
    config["n"] = a.n;
    config["reps"] = a.reps;
    config["probes"] = m.probes;
    results = moment_json(m);
    results["first_limit"] = first_target;
    results["second_limit"] = second_target;
  } else if (a.experiment == "lemma51") {
    const double tol = a.tolerance > 0.0 ? a.tolerance : 0.10;
    const cst::ConstantEstimate alpha = resolve_alpha(1, a.d, table);
    voronoi::DensityCheckOptions opts;
    opts.samples = a.samples;
    opts.seed = *a.seed;
    const auto rows = voronoi::lemma51_density_check(spec, a.v, opts);
    out << fmt::format("small-volume densities: {}, d = {}, {} samples per grid value\n", a.density, a.d, a.samples);
    out << fmt::format("{:>10}{:>18}{:>22}\n", "v", "f_V1(v)", "f_V(v) / v");
    json jr = json::array();
    for (const auto& r : rows) {
      out << fmt::format("{:>10g}{:>11.4f} ({:.0e}){:>14.4f} ({:.0e})\n", r.v, r.f_v1, r.f_v1_se, r.f_v_over_v,
                         r.f_v_over_v_se);
      jr.push_back({{"v", r.v}, {"f_v1", r.f_v1}, {"f_v1_se", r.f_v1_se}, {"f_v_over_v", r.f_v_over_v},
                    {"f_v_over_v_se", r.f_v_over_v_se}});
      passed = passed && std::fabs(r.f_v1 - ratio) <= tol * ratio &&
               std::fabs(r.f_v_over_v - alpha.value * ratio * ratio) <= tol * alpha.value * ratio * ratio;
    }
    out << fmt::format("limits: {:.4f} and {:.4f}\n", ratio, alpha.value * ratio * ratio);
    if (!passed) failure = fmt::format("density outside {:g}% of its limit", 100.0 * tol);
    config["samples"] = a.samples;
    results = {{"rows", jr}, {"limits", {ratio, alpha.value * ratio * ratio}}};
  } else if (a.experiment == "lemma53") {
    const cst::ConstantEstimate alpha = resolve_alpha(a.M, a.d, table);
    std::vector<voronoi::MomentEstimate> runs;
    json jr = json::array();
    out << fmt::format("moment boundedness sweep: {}, M = {}, d = {}\n", a.density, a.M, a.d);
    out << fmt::format("{:>8}{:>14}{:>14}\n", "n", "n E[nu]", "n^2 E[nu^2]");
    for (int n : a.n_grid) {
      voronoi::ExperimentOptions opts;
      opts.M = a.M;
      opts.n = n;
      opts.replications = a.reps;
      opts.probes = a.probes;
      opts.seed = derive_seed(*a.seed, static_cast<std::uint64_t>(n));
      runs.push_back(voronoi::theorem31_experiment(spec, opts));
      out << fmt::format("{:>8}{:>14.5f}{:>14.5f}\n", n, runs.back().first_moment, runs.back().second_moment);
      jr.push_back(moment_json(runs.back()));
    }
    const auto report = voronoi::lemma53_diagnostic(runs, a.M * ratio, alpha.value * ratio * ratio);
    out << fmt::format("max first {:.5f}, max second {:.5f}, divergence flag {}\n", report.max_first,
                       report.max_second, report.flagged() ? "ON" : "off");
    passed = !report.flagged();
    if (!passed) failure = "moment sequence diverges";
    results = {{"runs", jr}, {"max_first", report.max_first}, {"max_second", report.max_second},
               {"flagged", report.flagged()}};
  } else {
    fail(ErrorCode::kInvalidArgument, fmt::format("unknown experiment '{}'", a.experiment));
  }
  out << (passed ? "PASS\n" : fmt::format("FAIL: {}\n", failure));
  if (!a.out_path.empty()) {
    write_record(a.out_path, {{"tool_version", MATCHVAR_VERSION},
                              {"subcommand", "verify"},
                              {"config", config},
                              {"results", results},
                              {"passed", passed}});
  }
  if (!passed) throw ExitRequest{kExitAssertion, failure};
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInsufficientGroup: return kExitInsufficientGroup;
    default: return kExitInvalid;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Nearest-neighbor matching estimator, its limiting variance, and the constants behind it.",
               "matchvar"};
  app.set_version_flag("--version", std::string(MATCHVAR_VERSION));
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Cap on worker threads (0 = runtime default)")->check(CLI::NonNegativeNumber);

  ConstantsArgs ca;
  CLI::App* c = app.add_subcommand("constants", "Compute alpha(d) and alpha(M, d), update the cache, print a table");
  c->add_option("--d", ca.d, "Dimensions (default 1..10)")->delimiter(',')->check(CLI::Range(1, 64));
  c->add_option("--M", ca.M, "Numbers of matches (default 1)")->delimiter(',')->check(CLI::Range(1, 20));
  c->add_option("--method", ca.method, "mc | quadrature | closed-form | all")
      ->check(CLI::IsMember({"mc", "quadrature", "closed-form", "all"}))
      ->capture_default_str();
  c->add_option("--samples", ca.samples, "Monte Carlo sample size")->check(CLI::Range(1000LL, 1'000'000'000'000LL))
      ->capture_default_str();
  c->add_option("--seed", ca.seed, "Monte Carlo seed (without it, cached values are used)");
  c->add_option("--cache", ca.cache, "Constants cache file (default: the shipped data/constants.json)");
  c->add_flag("--recompute", ca.recompute, "Ignore cached values");
  c->add_option("--grid", ca.grid, "Quadrature nodes per axis on the coarsest grid")->check(CLI::Range(2, 4096))
      ->capture_default_str();
  c->add_option("--refine", ca.refine, "Quadrature grid doublings")->check(CLI::Range(0, 6))->capture_default_str();

  EstimateArgs ea;
  CLI::App* e = app.add_subcommand("estimate", "Estimate the treatment effect and its variance from a CSV file");
  e->add_option("--input", ea.input, "CSV with header Y,W,X_1,...,X_d")->required();
  e->add_option("--M", ea.M, "Number of matches")->check(CLI::Range(1, 1000))->capture_default_str();
  e->add_flag("--no-bias-correction", ea.no_bias_correction, "Report the uncorrected estimate only");
  e->add_flag("--no-ci", ea.no_ci, "Skip variance estimation and the confidence interval");
  e->add_option("--level", ea.level, "Confidence level")->check(CLI::Range(0.5, 0.9999))->capture_default_str();
  e->add_option("--cache", ea.cache, "Constants cache file (default: the shipped data/constants.json)");
  e->add_flag("--compute-constants", ea.compute_constants, "Compute alpha(M, d) when the cache lacks it");
  e->add_option("--J-var", ea.J_var, "Same-group neighbors for the variance surrogate")->check(CLI::Range(1, 100))
      ->capture_default_str();
  e->add_option("--propensity", ea.propensity, "logistic | knn | constant")
      ->check(CLI::IsMember({"logistic", "knn", "constant"}))
      ->capture_default_str();
  e->add_option("--degree", ea.degree, "Polynomial degree of the bias-correction regression")
      ->check(CLI::Range(1, 4))
      ->capture_default_str();
  e->add_option("--out", ea.out_path, "Write a JSON record here");

  SimulateArgs sa;
  CLI::App* s = app.add_subcommand("simulate", "Run a simulation check on a registered or configured DGP");
  s->add_option("--preset", sa.preset, "linear-constant-e | linear-logistic-e | nonlinear-constant-e | "
                                       "nonlinear-logistic-e");
  s->add_option("--config", sa.config, "JSON experiment config (flags override it)");
  s->add_option("--check", sa.check, "coverage | vE | decomposition")
      ->check(CLI::IsMember({"coverage", "vE", "decomposition"}));
  s->add_option("--M", sa.M, "Number of matches")->check(CLI::Range(1, 100))->capture_default_str();
  s->add_option("--d", sa.d, "Covariate dimension")->check(CLI::Range(1, 32))->capture_default_str();
  s->add_option("--n", sa.n, "Sample size")->check(CLI::Range(10, 10'000'000))->capture_default_str();
  s->add_option("--reps", sa.reps, "Replications (at the largest n for vE)")->check(CLI::Range(2LL, 100'000'000LL))
      ->capture_default_str();
  s->add_option("--n-grid", sa.n_grid, "Sample sizes for the vE check")->delimiter(',')->capture_default_str();
  s->add_option("--level", sa.level, "Confidence level")->check(CLI::Range(0.5, 0.9999))->capture_default_str();
  s->add_option("--seed", sa.seed, "Master seed (default: the preset's seed)");
  s->add_option("--replay", sa.replay, "Rerun one replication by index and print it")->check(CLI::NonNegativeNumber);
  s->add_option("--cache", sa.cache, "Constants cache file (default: the shipped data/constants.json)");
  s->add_option("--out", sa.out_path, "Write a JSON record here");

  VerifyArgs va;
  CLI::App* v = app.add_subcommand("verify", "Direct Monte Carlo checks of the catchment-area limits");
  v->add_option("--experiment", va.experiment, "thm31 (catchment moments) | lemma51 (small-volume densities) | lemma53 (moment growth in n)")
      ->check(CLI::IsMember({"thm31", "lemma51", "lemma53"}));
  v->add_option("--config", va.config, "JSON experiment config (flags override it)");
  v->add_option("--density", va.density, "uniform_torus | uniform_cube | piecewise_product")
      ->check(CLI::IsMember({"uniform_torus", "uniform_cube", "piecewise_product"}))
      ->capture_default_str();
  v->add_option("--ratio", va.ratio, "f1(x)/f0(x) for piecewise_product")->check(CLI::PositiveNumber)
      ->capture_default_str();
  v->add_option("--M", va.M, "Number of matches")->check(CLI::Range(1, 100))->capture_default_str();
  v->add_option("--d", va.d, "Dimension")->check(CLI::Range(1, 16))->capture_default_str();
  v->add_option("--n", va.n, "Points per replication, x included")->check(CLI::Range(2, 10'000'000))
      ->capture_default_str();
  v->add_option("--reps", va.reps, "Replications")->check(CLI::Range(2LL, 100'000'000LL))->capture_default_str();
  v->add_option("--probes", va.probes, "Probe points per replication (0 = 10 n)")->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  v->add_option("--v", va.v, "Volume grid for lemma51, values in (0, 0.1]")->delimiter(',')->capture_default_str();
  v->add_option("--samples", va.samples, "Draws per grid value for lemma51")->check(CLI::Range(1000LL, 1'000'000'000LL))
      ->capture_default_str();
  v->add_option("--n-grid", va.n_grid, "Sample sizes for lemma53")->delimiter(',')->capture_default_str();
  v->add_option("--tolerance", va.tolerance, "Relative tolerance (default 0.05, lemma51 0.10)");
  v->add_option("--seed", va.seed, "Master seed (required)");
  v->add_option("--cache", va.cache, "Constants cache file (default: the shipped data/constants.json)");
  v->add_option("--out", va.out_path, "Write a JSON record here");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  set_thread_cap(threads);
  try {
    if (c->parsed()) return cmd_constants(ca, out);
    if (e->parsed()) return cmd_estimate(ea, out);
    if (s->parsed()) return cmd_simulate(sa, *s, out);
    if (v->parsed()) return cmd_verify(va, *v, out);
  } catch (const ExitRequest& req) {
    err << "matchvar: " << req.message << '\n';
    return req.code;
  } catch (const Error& ex) {
    err << "matchvar: " << ex.what() << '\n';
    return exit_code_for(ex.code());
  } catch (const std::exception& ex) {
    err << "matchvar: internal error: " << ex.what() << '\n';
    return kExitInternal;
  }
  return kExitInvalid;
}

}  // namespace matchvar::cli
