#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "matchvar/constants.hpp"
#include "matchvar/dataset.hpp"
#include "matchvar/parallel.hpp"

/// Nearest-neighbor matching estimator of the average treatment effect with
/// a fixed number M of matches per unit, matching with replacement.
namespace matchvar::matching {

struct MatchResult {
  int M = 1;
  std::vector<std::size_t> matches;  ///< row i's M opposite-group matches at [i*M, (i+1)*M), nearest first
  std::vector<int> times_used;       ///< K_M(i): how often row i serves as a match
  std::vector<double> y0_hat;        ///< imputed outcome under control
  std::vector<double> y1_hat;        ///< imputed outcome under treatment

  [[nodiscard]] std::span<const std::size_t> matches_of(std::size_t i) const noexcept {
    return {matches.data() + i * static_cast<std::size_t>(M), static_cast<std::size_t>(M)};
  }
  [[nodiscard]] std::size_t n() const noexcept { return times_used.size(); }
};

/// Euclidean M nearest opposite-group units, ties to the smaller row.
/// Throws kInsufficientGroup when a group has fewer than M units.
MatchResult find_matches(const Dataset& data, int M, Execution exec = Execution::kParallel);
/// Same result by exhaustive scan.
MatchResult find_matches_bruteforce(const Dataset& data, int M);

struct TauForms {
  double weighting = 0.0;   ///< (1/n) sum (2W - 1)(1 + K/M) Y
  double imputation = 0.0;  ///< (1/n) sum (Y1_hat - Y0_hat)
};
TauForms tau_hat_forms(const Dataset& data, const MatchResult& matches);
/// Weighting form, after checking it equals the imputation form to 1e-12
/// relative.
double tau_hat(const Dataset& data, const MatchResult& matches);

struct RegressionSpec {
  int degree = 1;
};
/// Regression estimate of the matching-discrepancy bias: per-group
/// polynomial fits of Y on X evaluated at each unit and at its matches.
/// Zero without fitting when every unit coincides with all its matches.
double bias_correction(const Dataset& data, const MatchResult& matches, const RegressionSpec& spec = {});

/// Per-unit conditional-variance surrogate from the J_var nearest
/// same-group neighbors: (J/(J+1)) (Y_i - neighbor mean)^2.
std::vector<double> conditional_variance_nn(const Dataset& data, int J_var = 2,
                                            Execution exec = Execution::kParallel);

/// (1/n) sum (1 + K/M)^2 sigma2_i.
double v_E(std::span<const int> times_used, int M, std::span<const double> sigma2);
double v_E(const MatchResult& matches, std::span<const double> sigma2);

enum class PropensityMethod { kLogistic, kKnn, kConstant, kOracle };
struct PropensitySpec {
  PropensityMethod method = PropensityMethod::kLogistic;
  std::vector<double> oracle;  ///< e(X_i), oracle method only
  int knn_k = 0;               ///< 0 selects max(10, sqrt(n))
};
/// Unclamped propensity estimates; logistic falls back to k-NN when the fit
/// fails (non-convergence or separation).
std::vector<double> estimate_propensity(const Dataset& data, const PropensitySpec& spec);

inline constexpr double kPropensityClamp = 0.05;

enum class SigmaMethod { kNearestNeighbor, kOracle };
struct SigmaSpec {
  SigmaMethod method = SigmaMethod::kNearestNeighbor;
  int J_var = 2;
  std::vector<double> oracle0;  ///< sigma_0^2(X_i), oracle method only
  std::vector<double> oracle1;  ///< sigma_1^2(X_i)
};

enum class VTauMethod { kHeuristic, kOracle, kZero };
struct VTauSpec {
  VTauMethod method = VTauMethod::kHeuristic;
  double oracle = 0.0;
};

struct VarianceComponents {
  double v_E = 0.0;
  double v_tauX = 0.0;
  double v_M = 0.0;
  double sigma2 = 0.0;  ///< plug-in limiting variance
  double alpha_Md = 0.0;
  std::vector<double> sigma2_own;  ///< sigma^2_{W_i}(X_i)
  std::vector<double> sigma2_0;    ///< sigma_0^2 at every X_i
  std::vector<double> sigma2_1;    ///< sigma_1^2 at every X_i
  std::vector<double> e_hat;       ///< clamped to [0.05, 0.95]
};

/// Sample-average version of the closed-form limiting variance. Each unit's
/// opposite-group variance is the mean of its matches' own-group values.
VarianceComponents sigma2_Md_plugin(const Dataset& data, const MatchResult& matches, double alpha_Md,
                                    const PropensitySpec& e_spec = {}, const SigmaSpec& sigma_spec = {},
                                    const VTauSpec& vtau_spec = {});
/// Looks alpha(M, d) up in the table; throws kMissingConstants if absent.
VarianceComponents sigma2_Md_plugin(const Dataset& data, const MatchResult& matches,
                                    const constants::ConstantsTable& constants, const PropensitySpec& e_spec = {},
                                    const SigmaSpec& sigma_spec = {}, const VTauSpec& vtau_spec = {});

/// The closed-form weight multiplying sigma_1^2 (treated = true) or
/// sigma_0^2 at propensity e.
double variance_weight(double alpha_Md, int M, double e, bool treated) noexcept;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};
/// tau_bc -/+ z_{(1+level)/2} sqrt(sigma2 / n).
Interval confidence_interval(double tau_bc, double sigma2, std::size_t n, double level);
double normal_quantile(double p);

struct EstimateOptions {
  int M = 1;
  bool bias_correct = true;
  RegressionSpec regression;
  bool with_variance = true;
  double level = 0.95;
  PropensitySpec propensity;
  SigmaSpec sigma;
  VTauSpec vtau;
  Execution execution = Execution::kParallel;
};

struct EstimateReport {
  int M = 1;
  int d = 1;
  std::size_t n = 0;
  std::size_t n0 = 0;
  std::size_t n1 = 0;
  double tau_hat = 0.0;
  double B_hat = 0.0;
  double tau_bc = 0.0;
  std::optional<VarianceComponents> variance;
  std::optional<constants::ConstantEstimate> alpha;
  std::optional<Interval> ci;
  double level = 0.95;
};

/// Full pipeline: matches, estimate, optional bias correction, optional
/// variance and interval (the latter needs alpha(M, d) in `constants`).
EstimateReport estimate(const Dataset& data, const EstimateOptions& opts,
                        const constants::ConstantsTable* constants = nullptr);

}  // namespace matchvar::matching
