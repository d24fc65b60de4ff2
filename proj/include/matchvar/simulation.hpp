#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "matchvar/dataset.hpp"
#include "matchvar/parallel.hpp"
#include "matchvar/rng.hpp"

/// Synthetic data-generating processes with known mean, variance and
/// propensity functions, and replication experiments built on them.
namespace matchvar::simulation {

enum class CovariateLaw { kUniform, kBeta };

/// Covariates on [0,1]^d (uniform or i.i.d. Beta(a, b) coordinates).
/// Propensity, variances and the effect depend on the first coordinate only:
///   e(x)        = e_const, or logistic(e0 + e1 x_1)
///   mu_0(x)     = m0 + m1 sum_c x_c + m2 sum_c x_c^2
///   tau(x)      = t0 + t1 x_1 + t2 x_1^2,   mu_1 = mu_0 + tau
///   sigma_w^2(x) = s_w0 + s_w1 x_1
struct DGPSpec {
  std::string name = "custom";
  int d = 2;
  CovariateLaw law = CovariateLaw::kUniform;
  double beta_a = 2.0;
  double beta_b = 2.0;
  bool logistic_propensity = false;
  double e_const = 0.5;
  double e0 = 0.0;
  double e1 = 0.0;
  double m0 = 0.0;
  double m1 = 1.0;
  double m2 = 0.0;
  double t0 = 1.0;
  double t1 = 0.0;
  double t2 = 0.0;
  double s00 = 1.0;
  double s01 = 0.0;
  double s10 = 1.0;
  double s11 = 0.0;
  int regression_degree = 1;  ///< bias-correction degree matching the means
  std::uint64_t default_seed = 1;

  /// Overlap and variance bounds hold on the whole support.
  void validate() const;

  [[nodiscard]] double propensity(std::span<const double> x) const noexcept;
  [[nodiscard]] double mu(int w, std::span<const double> x) const noexcept;
  [[nodiscard]] double effect(std::span<const double> x) const noexcept;
  [[nodiscard]] double variance(int w, std::span<const double> x) const noexcept;
};

inline constexpr double kOverlapBound = 0.05;

std::vector<std::string> preset_names();
/// Throws kUnsupportedSpec for unknown names.
DGPSpec preset(std::string_view name, int d = 2);

/// JSON object with any DGPSpec field; "preset" selects the starting point.
DGPSpec dgp_from_json_text(const std::string& text);
std::string dgp_to_json_text(const DGPSpec& dgp);

/// Population moments by Gauss-Legendre integration over x_1.
struct PopulationMoments {
  double tau = 0.0;     ///< E[tau(X)]
  double v_tauX = 0.0;  ///< Var(tau(X))
  double noise = 0.0;   ///< the two variance-weighted terms
  double sigma2 = 0.0;  ///< v_tauX + noise
};
PopulationMoments population_moments(const DGPSpec& dgp, double alpha_Md, int M);
double population_sigma2_Md(const DGPSpec& dgp, double alpha_Md, int M);

struct SimulatedData {
  Dataset data;
  std::vector<double> mu0;
  std::vector<double> mu1;
  std::vector<double> sigma2_0;
  std::vector<double> sigma2_1;
  std::vector<double> propensity;
  std::vector<double> noise;  ///< epsilon_i = Y_i - mu_{W_i}(X_i)
};
/// Redraws the treatment vector when a group would be smaller than
/// `min_group`, so matching is always defined.
SimulatedData simulate(const DGPSpec& dgp, std::size_t n, RngStream& rng, std::size_t min_group = 1);

struct Decomposition {
  double tau_hat = 0.0;
  double tau = 0.0;      ///< population effect
  double tau_bar = 0.0;  ///< (1/n) sum tau(X_i)
  double E_M = 0.0;
  double B_M = 0.0;  ///< bias with the true means
  double residual = 0.0;
};
Decomposition decomposition(const SimulatedData& sim, const DGPSpec& dgp, int M);
Decomposition decomposition_check(const DGPSpec& dgp, int M, std::size_t n, std::uint64_t seed);

struct ReplicationOutcome {
  std::int64_t rep = 0;
  std::uint64_t seed = 0;
  double tau_hat = 0.0;
  double B_hat = 0.0;
  double tau_bc = 0.0;
  double v_E_oracle = 0.0;
  double v_E_plugin = 0.0;
  double tau_bar = 0.0;
  double E_M = 0.0;
  double B_M = 0.0;
  double sigma2_plugin = 0.0;
  double z_oracle = 0.0;  ///< sqrt(n)(tau_bc - tau) / sigma_population
  bool covered_oracle = false;
  bool covered_plugin = false;
};

struct ReplicationSettings {
  int M = 1;
  std::size_t n = 1000;
  double level = 0.95;
  double alpha_Md = 0.0;  ///< required for the plug-in interval
  bool plugin = true;     ///< also run the data-driven variance estimate
};
ReplicationOutcome run_replication(const DGPSpec& dgp, const ReplicationSettings& settings, std::int64_t rep,
                                   std::uint64_t seed);

struct TrendRow {
  std::size_t n = 0;
  std::int64_t replications = 0;
  double mean_v_E = 0.0;
  double se = 0.0;
  double limit = 0.0;
  double relative_gap = 0.0;  ///< |mean - limit| / limit
};

/// Oracle-variance V^E averaged over replications at each n. Replication
/// counts scale with n_max / n so every row has similar precision.
std::vector<TrendRow> vE_convergence_experiment(const DGPSpec& dgp, int M, std::span<const std::size_t> n_grid,
                                                std::int64_t replications, std::uint64_t seed, double alpha_Md,
                                                Execution exec = Execution::kParallel);
bool gap_monotone(std::span<const TrendRow> rows) noexcept;

struct CoverageReport {
  std::int64_t replications = 0;
  double level = 0.95;
  double sigma2_population = 0.0;
  double coverage_oracle = 0.0;
  double coverage_plugin = 0.0;
  double band_lo = 0.0;  ///< level -/+ 3 binomial standard deviations
  double band_hi = 0.0;
  double z_mean = 0.0;
  double z_var = 0.0;
  double ks_distance = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;  ///< one per replication, for replay
};

CoverageReport clt_coverage_experiment(const DGPSpec& dgp, const ReplicationSettings& settings,
                                       std::int64_t replications, std::uint64_t seed,
                                       Execution exec = Execution::kParallel);

/// Kolmogorov distance between the empirical law of `z` and N(0, 1).
double ks_distance_to_normal(std::vector<double> z);

}  // namespace matchvar::simulation
