#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "matchvar/parallel.hpp"
#include "matchvar/points.hpp"
#include "matchvar/rng.hpp"

/// Direct simulation of the catchment area of a fixed point x: the region
/// of covariate space whose M-nearest-sample-point set contains x.
namespace matchvar::voronoi {

/// Unit torus [0,1)^d with the wrap-around metric, or the unit cube with
/// the Euclidean metric.
enum class Metric { kEuclidean, kTorus };

double distance2(Metric metric, std::span<const double> a, std::span<const double> b) noexcept;

enum class SupportKind { kUniformTorus, kUniformCube, kPiecewiseProduct };

std::string_view to_string(SupportKind kind) noexcept;
SupportKind parse_support_kind(std::string_view text);

/// Periodic per-coordinate density on [0, 1) centered at `center`: `peak`
/// within `plateau` of the center, a linear ramp of width `ramp`, and a
/// floor level chosen so the profile integrates to 1. peak = 1 is uniform.
struct TrapezoidProfile {
  double peak = 1.0;
  double plateau = 0.1;
  double ramp = 0.1;

  [[nodiscard]] double floor_level() const noexcept;
  [[nodiscard]] double density(double offset) const noexcept;  // offset from the center, any real
  [[nodiscard]] double max_density() const noexcept;
  void validate() const;
};

/// The two covariate laws (control f0, treated f1) on a common compact
/// support, plus the evaluation point x. Product of identical profiles.
struct DensityPairSpec {
  SupportKind kind = SupportKind::kUniformTorus;
  int d = 2;
  TrapezoidProfile f0;
  TrapezoidProfile f1;
  std::vector<double> x;

  void validate() const;
  [[nodiscard]] Metric metric() const noexcept {
    return kind == SupportKind::kUniformCube ? Metric::kEuclidean : Metric::kTorus;
  }
  [[nodiscard]] double f0_at(std::span<const double> z) const noexcept;
  [[nodiscard]] double f1_at(std::span<const double> z) const noexcept;
  /// f1(x) / f0(x).
  [[nodiscard]] double density_ratio() const noexcept;
  [[nodiscard]] double f0_min() const noexcept;

  void sample_f0(RngStream& rng, std::span<double> out) const;
  void sample_f1(RngStream& rng, std::span<double> out) const;
};

DensityPairSpec uniform_torus(int d);
/// Unit cube with x at its center.
DensityPairSpec uniform_cube(int d);
/// Uniform f0 and a peaked f1 with f1(x) / f0(x) = ratio.
DensityPairSpec piecewise_product(int d, double ratio);

/// True iff at most M - 1 points of `others` are strictly closer to z than x.
bool in_catchment(std::span<const double> z, std::span<const double> x, const PointSet& others, int M,
                  Metric metric);

/// Uniform cell grid over [0,1)^d answering "are at least `cap` points
/// strictly inside radius^2 of z?" with an outward ring search that stops as
/// soon as the answer is known. Falls back to a full scan once the rings
/// would wrap around the whole grid.
class NeighborGrid {
 public:
  NeighborGrid(const PointSet& points, Metric metric, double points_per_cell = 2.0);

  /// Number of points with distance^2 < radius2, counting stops at `cap`.
  [[nodiscard]] int count_closer(std::span<const double> z, double radius2, int cap) const;
  [[nodiscard]] int count_closer_bruteforce(std::span<const double> z, double radius2, int cap) const;

  [[nodiscard]] int cells_per_axis() const noexcept { return cells_; }

 private:
  int scan_cell(std::size_t cell, std::span<const double> z, double radius2, int cap, int count) const;

  int dim_;
  Metric metric_;
  int cells_;
  double width_;
  std::vector<std::size_t> cell_start_;
  std::vector<double> coords_;  // points sorted by cell
};

struct CatchmentSample {
  std::vector<double> x;
  PointSet others;
  PointSet probes;
  Metric metric = Metric::kTorus;
};

struct CatchmentMeasure {
  double nu_hat = 0.0;     ///< fraction of probes in the catchment
  double nu_sq_hat = 0.0;  ///< unbiased pair statistic for the squared measure
  std::int64_t hits = 0;
};

/// `exec` only selects how probes are processed; the result is identical.
CatchmentMeasure catchment_measure_estimate(const CatchmentSample& sample, int M,
                                            Execution exec = Execution::kSerial);
/// Reference evaluation by in_catchment on every probe and explicit pair
/// enumeration; O(m^2), for small cases only.
CatchmentMeasure catchment_measure_naive(const CatchmentSample& sample, int M);

struct MomentEstimate {
  double first_moment = 0.0;   ///< n * mean(nu_hat)
  double first_se = 0.0;
  double second_moment = 0.0;  ///< n^2 * mean(nu_sq_hat)
  double second_se = 0.0;
  int n = 0;
  int M = 0;
  int d = 0;
  std::int64_t replications = 0;
  std::int64_t probes = 0;
  std::uint64_t seed = 0;
};

struct ExperimentOptions {
  int M = 1;
  int n = 2000;
  std::int64_t replications = 1000;
  std::int64_t probes = 0;  ///< 0 selects 10 * n
  std::uint64_t seed = 1;
  Execution execution = Execution::kParallel;
};

/// Fresh n - 1 points from f0 and fresh probes from f1 per replication,
/// x held fixed; jackknife standard errors across replications.
MomentEstimate theorem31_experiment(const DensityPairSpec& spec, const ExperimentOptions& opts);

struct DensityRow {
  double v = 0.0;
  double f_v1 = 0.0;  ///< density of the single-ball measure at v
  double f_v1_se = 0.0;
  double f_v_over_v = 0.0;  ///< density of the two-ball union measure at v, over v
  double f_v_over_v_se = 0.0;
};

struct DensityCheckOptions {
  std::int64_t samples = 1'000'000;
  std::uint64_t seed = 1;
  double bin_half_width = 0.5;         ///< relative: bins are [v(1-w), v(1+w)]
  int integration_points = 256;        ///< per ball, non-uniform f0 only
  Execution execution = Execution::kParallel;
};

/// Histogram estimates of the densities of V1 = nu0(B(Z1, |Z1 - x|)) and of
/// V = nu0(B(Z1, |Z1 - x|) u B(Z2, |Z2 - x|)) at small v, Z1, Z2 ~ f1.
std::vector<DensityRow> lemma51_density_check(const DensityPairSpec& spec, std::span<const double> v_grid,
                                              const DensityCheckOptions& opts);

struct BoundednessReport {
  double max_first = 0.0;
  double max_second = 0.0;
  bool first_diverging = false;
  bool second_diverging = false;
  [[nodiscard]] bool flagged() const noexcept { return first_diverging || second_diverging; }
};

/// Flags a moment sequence (ordered by n) that grows monotonically past
/// three times its limit.
BoundednessReport lemma53_diagnostic(std::span<const MomentEstimate> runs, double first_limit, double second_limit);

}  // namespace matchvar::voronoi
