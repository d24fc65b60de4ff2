#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/rational.hpp>

#include "matchvar/parallel.hpp"

/// Distribution-free constants of the second catchment-measure moment:
/// alpha(d) = E[2 / T^2], the triple constants c_ijk(d) and alpha(M, d).
namespace matchvar::constants {

enum class Kind { kAlphaD, kCijk, kAlphaMd };
enum class Method { kMonteCarlo, kQuadrature, kClosedForm };

std::string_view to_string(Kind kind) noexcept;
std::string_view to_string(Method method) noexcept;
Kind parse_kind(std::string_view text);
Method parse_method(std::string_view text);

struct ConstantEstimate {
  Kind kind = Kind::kAlphaD;
  Method method = Method::kMonteCarlo;
  int d = 1;
  int M = 0;  ///< used by alpha_Md only
  int i = 0;  ///< i, j, k used by c_ijk only
  int j = 0;
  int k = 0;
  double value = 0.0;
  double error_bound = 0.0;
  std::int64_t sample_size = 0;  ///< MC draws, or quadrature nodes per axis
  std::optional<std::uint64_t> seed;

  void validate() const;
  bool operator==(const ConstantEstimate&) const = default;
};

struct ConstantKey {
  Kind kind;
  int d;
  int M;
  int i;
  int j;
  int k;
  Method method;
  auto operator<=>(const ConstantKey&) const = default;
};

ConstantKey key_of(const ConstantEstimate& e) noexcept;

/// At most one entry per (kind, indices, method).
class ConstantsTable {
 public:
  /// Inserts or replaces the entry with the same key.
  void put(const ConstantEstimate& e);

  [[nodiscard]] std::optional<ConstantEstimate> find(Kind kind, Method method, int d, int M = 0, int i = 0,
                                                     int j = 0, int k = 0) const;
  /// Closed form first, then quadrature, then Monte Carlo.
  [[nodiscard]] std::optional<ConstantEstimate> find_best(Kind kind, int d, int M = 0, int i = 0, int j = 0,
                                                          int k = 0) const;

  [[nodiscard]] std::vector<ConstantEstimate> entries() const;
  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }

  std::string tool_version = MATCHVAR_VERSION;
  std::string created;

  bool operator==(const ConstantsTable&) const = default;

 private:
  std::map<ConstantKey, ConstantEstimate> entries_;
};

/// Index triple of the alpha(M, d) sum with its weight (i+j+k+1)!/(i! j! k!).
struct Triple {
  int i = 0;
  int j = 0;
  int k = 0;
  double weight = 0.0;
};
/// All (i, j, k) >= 0 with i + k <= M - 1 and j + k <= M - 1.
std::vector<Triple> alpha_Md_triples(int M);

/// P_ijk(1, v1, v2) = (1 - v1)^i (1 - v2)^j (v1 + v2 - 1)^k.
double triple_polynomial(int i, int j, int k, double v1, double v2) noexcept;

/// Union-volume ratio T for a point D of the unit ball: the ball of radius 1
/// centered at (1, 0, ..., 0) joined with B(D, |D|), over c_d. Always in [1, 2].
double t_statistic(std::span<const double> ball_point);

struct MonteCarloOptions {
  std::int64_t samples = 10'000'000;
  std::uint64_t seed = 1;
  Execution execution = Execution::kParallel;
};

ConstantEstimate alpha_d_monte_carlo(int d, const MonteCarloOptions& opts);
/// E[(2/T^2) * sum_triples weight * P(1, 1/T, w/T)] with w = |D|^d.
ConstantEstimate alpha_Md_monte_carlo(int M, int d, const MonteCarloOptions& opts);
/// Ratio of E[(P(1, 1/T, w/T) + P(1, w/T, 1/T)) / T^2] to E[2/T^2] over the
/// same draws; standard error by the delta method.
ConstantEstimate c_ijk_monte_carlo(int i, int j, int k, int d, const MonteCarloOptions& opts);

/// The eight-case closed form at d = 1.
ConstantEstimate c_ijk_closed_form_d1(int i, int j, int k);
boost::rational<std::int64_t> c_ijk_exact_d1(int i, int j, int k);
/// alpha(M, 1) through the generic triple sum with exact c_ijk(1) and alpha(1) = 3/2.
boost::rational<std::int64_t> alpha_M1_exact_sum(int M);
/// M (2M + 1) / 2.
boost::rational<std::int64_t> alpha_M1_formula(int M);

struct GridSpec {
  int base_resolution = 256;  ///< nodes per axis on the coarsest grid
  int refinement_depth = 1;   ///< number of grid doublings
  void validate() const;
};

struct QuadratureValue {
  double value = 0.0;
  double error_bound = 0.0;  ///< gap between the last two refinements
  int resolution = 0;        ///< nodes per axis on the finest grid
};

/// Integrals of P_ijk(1, v1, v2) times the density at 1 of the normalized
/// union volume over {v1, v2 <= 1, v1 + v2 >= 1}, one per triple, d >= 2.
/// Parametrizes that region by rays through the origin, (v1, v2) =
/// (u, 1 - u) / h(u, gamma) with h the normalized union volume, which turns
/// the root-finding problem into a smooth integrand on [0, 1] x [0, pi].
std::vector<QuadratureValue> density_moments(int d, std::span<const Triple> triples, const GridSpec& grid,
                                             Execution exec = Execution::kParallel);

/// Same integral by the midpoint rule on a resolution x resolution grid over
/// the unit square, solving for the root angle at every node. Converges
/// slowly because the integrand is singular along v1 + v2 = 1; kept as an
/// independent reference for the ray parametrization.
double density_moment_midpoint(int d, int i, int j, int k, int resolution,
                               Execution exec = Execution::kParallel);

ConstantEstimate alpha_d_quadrature(int d, const GridSpec& grid, Execution exec = Execution::kParallel);
/// Divides the triple integral by the supplied alpha(d) entry.
ConstantEstimate c_ijk_quadrature(int d, int i, int j, int k, const GridSpec& grid, const ConstantEstimate& alpha_d,
                                  Execution exec = Execution::kParallel);
/// Every c_ijk needed for alpha(M, d) from one shared grid.
std::vector<ConstantEstimate> c_ijk_quadrature_all(int M, int d, const GridSpec& grid, const ConstantEstimate& alpha_d,
                                                   Execution exec = Execution::kParallel);
/// alpha(M, d) as the weighted triple sum of density moments.
ConstantEstimate alpha_Md_quadrature(int M, int d, const GridSpec& grid, Execution exec = Execution::kParallel);

/// alpha(M, d) from a table: closed form at d = 1; otherwise alpha(d) times
/// the weighted sum of stored c_ijk entries (errors added linearly), falling
/// back to a stored alpha(M, d) entry. Throws kMissingConstants otherwise.
ConstantEstimate alpha_Md(int M, int d, const ConstantsTable& table);

/// Published reference values, used by the CLI for side-by-side tables.
std::optional<double> reference_alpha_d(int d);
std::optional<double> reference_alpha_Md(int M, int d);

}  // namespace matchvar::constants
