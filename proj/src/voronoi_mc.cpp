#include "matchvar/voronoi_mc.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>

#include "matchvar/error.hpp"
#include "matchvar/geometry.hpp"

namespace matchvar::voronoi {

namespace {
constexpr int kMaxGridDim = 32;
}  // namespace

double distance2(Metric metric, std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  if (metric == Metric::kTorus) {
    for (std::size_t c = 0; c < a.size(); ++c) {
      double diff = std::fabs(a[c] - b[c]);
      diff = std::min(diff, 1.0 - diff);
      s += diff * diff;
    }
  } else {
    for (std::size_t c = 0; c < a.size(); ++c) {
      const double diff = a[c] - b[c];
      s += diff * diff;
    }
  }
  return s;
}

std::string_view to_string(SupportKind kind) noexcept {
  switch (kind) {
    case SupportKind::kUniformTorus: return "uniform_torus";
    case SupportKind::kUniformCube: return "uniform_cube";
    case SupportKind::kPiecewiseProduct: return "piecewise_product";
  }
  return "?";
}

SupportKind parse_support_kind(std::string_view text) {
  if (text == "uniform_torus") return SupportKind::kUniformTorus;
  if (text == "uniform_cube") return SupportKind::kUniformCube;
  if (text == "piecewise_product") return SupportKind::kPiecewiseProduct;
  fail(ErrorCode::kUnsupportedSpec, fmt::format("unknown density pair '{}'", text));
}

double TrapezoidProfile::floor_level() const noexcept {
  const double high = 2.0 * plateau + ramp;
  return (1.0 - high * peak) / (1.0 - high);
}

double TrapezoidProfile::density(double offset) const noexcept {
  double s = offset - std::round(offset);
  s = std::fabs(s);
  const double low = floor_level();
  if (s <= plateau) return peak;
  if (s < plateau + ramp) return peak + (low - peak) * (s - plateau) / ramp;
  return low;
}

double TrapezoidProfile::max_density() const noexcept { return std::max(peak, floor_level()); }

void TrapezoidProfile::validate() const {
  if (!(plateau >= 0.0) || !(ramp > 0.0) || !(2.0 * plateau + 2.0 * ramp < 1.0)) {
    fail(ErrorCode::kUnsupportedSpec, "profile plateau and ramp must fit in half the period");
  }
  if (!(peak > 0.0) || !(floor_level() > 0.0)) {
    fail(ErrorCode::kUnsupportedSpec, "profile densities must stay strictly positive");
  }
}

void DensityPairSpec::validate() const {
  if (d < 1) fail(ErrorCode::kInvalidDimension, "density pair needs d >= 1");
  if (static_cast<int>(x.size()) != d) fail(ErrorCode::kUnsupportedSpec, "evaluation point has the wrong dimension");
  for (double c : x) {
    if (!(c >= 0.0 && c < 1.0)) fail(ErrorCode::kUnsupportedSpec, "evaluation point must lie in [0, 1)^d");
  }
  f0.validate();
  f1.validate();
  if (kind != SupportKind::kPiecewiseProduct && (f0.peak != 1.0 || f1.peak != 1.0)) {
    fail(ErrorCode::kUnsupportedSpec, "uniform density pairs must have flat profiles");
  }
}

double DensityPairSpec::f0_at(std::span<const double> z) const noexcept {
  double p = 1.0;
  for (int c = 0; c < d; ++c) p *= f0.density(z[c] - x[c]);
  return p;
}

double DensityPairSpec::f1_at(std::span<const double> z) const noexcept {
  double p = 1.0;
  for (int c = 0; c < d; ++c) p *= f1.density(z[c] - x[c]);
  return p;
}

double DensityPairSpec::density_ratio() const noexcept { return std::pow(f1.peak / f0.peak, d); }

double DensityPairSpec::f0_min() const noexcept { return std::pow(std::min(f0.peak, f0.floor_level()), d); }

namespace {
void sample_profile(const TrapezoidProfile& prof, std::span<const double> center, RngStream& rng,
                    std::span<double> out) {
  const double top = prof.max_density();
  const bool flat = prof.peak == 1.0;
  for (std::size_t c = 0; c < out.size(); ++c) {
    for (;;) {
      const double u = rng.uniform();
      if (flat || rng.uniform() * top <= prof.density(u - center[c])) {
        out[c] = u;
        break;
      }
    }
  }
}
}  // namespace

void DensityPairSpec::sample_f0(RngStream& rng, std::span<double> out) const { sample_profile(f0, x, rng, out); }
void DensityPairSpec::sample_f1(RngStream& rng, std::span<double> out) const { sample_profile(f1, x, rng, out); }

DensityPairSpec uniform_torus(int d) {
  DensityPairSpec s;
  s.kind = SupportKind::kUniformTorus;
  s.d = d;
  s.x.assign(static_cast<std::size_t>(std::max(d, 0)), 0.5);
  s.validate();
  return s;
}

DensityPairSpec uniform_cube(int d) {
  DensityPairSpec s = uniform_torus(d);
  s.kind = SupportKind::kUniformCube;
  return s;
}

DensityPairSpec piecewise_product(int d, double ratio) {
  if (!(ratio > 0.0)) fail(ErrorCode::kUnsupportedSpec, "density ratio must be positive");
  DensityPairSpec s;
  s.kind = SupportKind::kPiecewiseProduct;
  s.d = d;
  s.x.assign(static_cast<std::size_t>(std::max(d, 0)), 0.5);
  s.f1.peak = std::pow(ratio, 1.0 / std::max(d, 1));
  s.validate();
  return s;
}

bool in_catchment(std::span<const double> z, std::span<const double> x, const PointSet& others, int M,
                  Metric metric) {
  if (M < 1) fail(ErrorCode::kInvalidArgument, "M must be >= 1");
  const double r2 = distance2(metric, z, x);
  int closer = 0;
  for (std::size_t n = 0; n < others.size(); ++n) {
    if (distance2(metric, others[n], z) < r2 && ++closer >= M) return false;
  }
  return true;
}

NeighborGrid::NeighborGrid(const PointSet& points, Metric metric, double points_per_cell)
    : dim_(points.dim()), metric_(metric) {
  if (dim_ < 1 || dim_ > kMaxGridDim) fail(ErrorCode::kInvalidDimension, "grid needs 1 <= d <= 32");
  const double target = std::max(1.0, static_cast<double>(points.size()) / points_per_cell);
  cells_ = std::clamp(static_cast<int>(std::floor(std::pow(target, 1.0 / dim_))), 1, 1 << 12);
  while (std::pow(static_cast<double>(cells_), dim_) > 4.0e6 && cells_ > 1) --cells_;
  width_ = 1.0 / cells_;
  std::size_t total = 1;
  for (int c = 0; c < dim_; ++c) total *= static_cast<std::size_t>(cells_);
  auto cell_of = [&](std::span<const double> p) {
    std::size_t id = 0;
    for (int c = 0; c < dim_; ++c) {
      double v = p[static_cast<std::size_t>(c)];
      if (metric_ == Metric::kTorus) v -= std::floor(v);
      const int k = std::clamp(static_cast<int>(v * cells_), 0, cells_ - 1);
      id = id * static_cast<std::size_t>(cells_) + static_cast<std::size_t>(k);
    }
    return id;
  };
  std::vector<std::size_t> ids(points.size());
  cell_start_.assign(total + 1, 0);
  for (std::size_t n = 0; n < points.size(); ++n) {
    ids[n] = cell_of(points[n]);
    ++cell_start_[ids[n] + 1];
  }
  for (std::size_t c = 0; c < total; ++c) cell_start_[c + 1] += cell_start_[c];
  std::vector<std::size_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  coords_.resize(points.size() * static_cast<std::size_t>(dim_));
  for (std::size_t n = 0; n < points.size(); ++n) {
    const auto p = points[n];
    std::copy(p.begin(), p.end(), coords_.begin() + static_cast<std::ptrdiff_t>(fill[ids[n]]++ * dim_));
  }
}

int NeighborGrid::scan_cell(std::size_t cell, std::span<const double> z, double radius2, int cap, int count) const {
  const auto D = static_cast<std::size_t>(dim_);
  for (std::size_t n = cell_start_[cell]; n < cell_start_[cell + 1]; ++n) {
    if (distance2(metric_, std::span<const double>(coords_.data() + n * D, D), z) < radius2 && ++count >= cap) {
      return cap;
    }
  }
  return count;
}

int NeighborGrid::count_closer_bruteforce(std::span<const double> z, double radius2, int cap) const {
  int count = 0;
  const auto D = static_cast<std::size_t>(dim_);
  const std::size_t n = coords_.size() / D;
  for (std::size_t p = 0; p < n; ++p) {
    if (distance2(metric_, std::span<const double>(coords_.data() + p * D, D), z) < radius2 && ++count >= cap) {
      return cap;
    }
  }
  return count;
}

int NeighborGrid::count_closer(std::span<const double> z, double radius2, int cap) const {
  if (cap <= 0) return 0;
  std::array<int, kMaxGridDim> home{};
  for (int c = 0; c < dim_; ++c) {
    double v = z[static_cast<std::size_t>(c)];
    if (metric_ == Metric::kTorus) v -= std::floor(v);
    home[static_cast<std::size_t>(c)] = std::clamp(static_cast<int>(v * cells_), 0, cells_ - 1);
  }
  std::array<int, kMaxGridDim> offset{};
  int count = 0;
  for (int r = 0;; ++r) {
    if (r >= 2) {
      const double gap = (r - 1) * width_;
      if (gap * gap >= radius2) return count;  // no unvisited point can be strictly closer
    }
    if (metric_ == Metric::kTorus && 2 * r + 1 > cells_) return count_closer_bruteforce(z, radius2, cap);
    if (metric_ == Metric::kEuclidean && r > cells_) return count;
    // Odometer over the cube of half-width r, keeping only its boundary shell.
    std::fill_n(offset.begin(), dim_, -r);
    for (;;) {
      bool on_shell = false;
      for (int c = 0; c < dim_; ++c) on_shell = on_shell || offset[c] == r || offset[c] == -r;
      if (on_shell || r == 0) {
        std::size_t id = 0;
        bool inside = true;
        for (int c = 0; c < dim_; ++c) {
          int k = home[static_cast<std::size_t>(c)] + offset[static_cast<std::size_t>(c)];
          if (metric_ == Metric::kTorus) {
            k = ((k % cells_) + cells_) % cells_;
          } else if (k < 0 || k >= cells_) {
            inside = false;
            break;
          }
          id = id * static_cast<std::size_t>(cells_) + static_cast<std::size_t>(k);
        }
        if (inside) {
          count = scan_cell(id, z, radius2, cap, count);
          if (count >= cap) return cap;
        }
      }
      int c = 0;
      while (c < dim_ && offset[static_cast<std::size_t>(c)] == r) offset[static_cast<std::size_t>(c++)] = -r;
      if (c == dim_) break;
      ++offset[static_cast<std::size_t>(c)];
    }
  }
}

namespace {
double pair_statistic(std::int64_t hits, std::int64_t m) {
  const double h = static_cast<double>(hits);
  const double mm = static_cast<double>(m);
  return h * (h - 1.0) / (mm * (mm - 1.0));
}
}  // namespace

CatchmentMeasure catchment_measure_estimate(const CatchmentSample& sample, int M, Execution exec) {
  if (M < 1) fail(ErrorCode::kInvalidArgument, "M must be >= 1");
  const auto m = static_cast<std::int64_t>(sample.probes.size());
  if (m < 2) fail(ErrorCode::kInvalidArgument, "at least two probes are required");
  std::vector<char> inside(static_cast<std::size_t>(m), 0);
  if (sample.others.empty()) {
    std::fill(inside.begin(), inside.end(), 1);
  } else {
    const NeighborGrid grid(sample.others, sample.metric);
    parallel_for(exec, m, [&](std::int64_t p) {
      const auto z = sample.probes[static_cast<std::size_t>(p)];
      const double r2 = distance2(sample.metric, z, sample.x);
      inside[static_cast<std::size_t>(p)] = grid.count_closer(z, r2, M) < M;
    });
  }
  std::int64_t hits = 0;
  for (char c : inside) hits += c;
  return {static_cast<double>(hits) / static_cast<double>(m), pair_statistic(hits, m), hits};
}

CatchmentMeasure catchment_measure_naive(const CatchmentSample& sample, int M) {
  const std::size_t m = sample.probes.size();
  if (m < 2) fail(ErrorCode::kInvalidArgument, "at least two probes are required");
  std::vector<int> ind(m);
  std::int64_t hits = 0;
  for (std::size_t p = 0; p < m; ++p) {
    ind[p] = in_catchment(sample.probes[p], sample.x, sample.others, M, sample.metric) ? 1 : 0;
    hits += ind[p];
  }
  std::int64_t pairs = 0;
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b) {
      if (a != b) pairs += ind[a] * ind[b];
    }
  }
  const double mm = static_cast<double>(m);
  return {static_cast<double>(hits) / mm, static_cast<double>(pairs) / (mm * (mm - 1.0)), hits};
}

MomentEstimate theorem31_experiment(const DensityPairSpec& spec, const ExperimentOptions& opts) {
  spec.validate();
  if (opts.M < 1) fail(ErrorCode::kInvalidArgument, "M must be >= 1");
  if (opts.n <= opts.M) fail(ErrorCode::kInvalidArgument, "sample size n must exceed M");
  if (opts.replications < 2) fail(ErrorCode::kInvalidArgument, "at least two replications are required");
  const std::int64_t m = opts.probes > 0 ? opts.probes : 10 * static_cast<std::int64_t>(opts.n);
  if (m < 2) fail(ErrorCode::kInvalidArgument, "at least two probes are required");
  const Metric metric = spec.metric();
  const double n = opts.n;
  std::vector<double> first(static_cast<std::size_t>(opts.replications));
  std::vector<double> second(first.size());
  parallel_for(opts.execution, opts.replications, [&](std::int64_t rep) {
    RngStream rng(derive_seed(opts.seed, static_cast<std::uint64_t>(rep)));
    PointSet others(spec.d);
    others.resize(static_cast<std::size_t>(opts.n - 1));
    for (std::size_t p = 0; p < others.size(); ++p) spec.sample_f0(rng, others.mutable_point(p));
    const NeighborGrid grid(others, metric);
    std::vector<double> z(static_cast<std::size_t>(spec.d));
    std::int64_t hits = 0;
    for (std::int64_t p = 0; p < m; ++p) {
      spec.sample_f1(rng, z);
      if (grid.count_closer(z, distance2(metric, z, spec.x), opts.M) < opts.M) ++hits;
    }
    first[static_cast<std::size_t>(rep)] = n * static_cast<double>(hits) / static_cast<double>(m);
    second[static_cast<std::size_t>(rep)] = n * n * pair_statistic(hits, m);
  });
  const JackknifeSummary a = jackknife_mean(first);
  const JackknifeSummary b = jackknife_mean(second);
  MomentEstimate out;
  out.first_moment = a.mean;
  out.first_se = a.standard_error;
  out.second_moment = b.mean;
  out.second_se = b.standard_error;
  out.n = opts.n;
  out.M = opts.M;
  out.d = spec.d;
  out.replications = opts.replications;
  out.probes = m;
  out.seed = opts.seed;
  return out;
}

namespace {

// Uniform point of the ball B(center, radius), wrapped onto the torus.
void sample_ball_around(std::span<const double> center, double radius, RngStream& rng, std::span<double> out) {
  geometry::sample_unit_ball(rng, out);
  for (std::size_t c = 0; c < out.size(); ++c) {
    const double v = center[c] + radius * out[c];
    out[c] = v - std::floor(v);
  }
}

// f0-measure of B(c1, r1) u B(c2, r2) (second ball optional) by uniform
// sampling inside each ball.
double f0_measure(const DensityPairSpec& spec, std::span<const double> c1, double r1, std::span<const double> c2,
                  double r2, int points, RngStream& rng, std::span<double> buf) {
  const double cd = geometry::unit_ball_volume(spec.d);
  double first = 0.0;
  for (int q = 0; q < points; ++q) {
    sample_ball_around(c1, r1, rng, buf);
    first += spec.f0_at(buf);
  }
  double total = cd * std::pow(r1, spec.d) * first / points;
  if (c2.empty()) return total;
  double second = 0.0;
  for (int q = 0; q < points; ++q) {
    sample_ball_around(c2, r2, rng, buf);
    if (distance2(Metric::kTorus, buf, c1) > r1 * r1) second += spec.f0_at(buf);
  }
  return total + cd * std::pow(r2, spec.d) * second / points;
}

}  // namespace

std::vector<DensityRow> lemma51_density_check(const DensityPairSpec& spec, std::span<const double> v_grid,
                                              const DensityCheckOptions& opts) {
  spec.validate();
  if (spec.kind == SupportKind::kUniformCube) {
    fail(ErrorCode::kUnsupportedSpec, "the density check runs on the torus only");
  }
  if (opts.samples < 1000) fail(ErrorCode::kInvalidArgument, "density check needs at least 1000 samples");
  if (!(opts.bin_half_width > 0.0 && opts.bin_half_width < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "relative bin half-width must lie in (0, 1)");
  }
  const int d = spec.d;
  const double cd = geometry::unit_ball_volume(d);
  const bool flat_f0 = spec.f0.peak == 1.0;
  const double w = opts.bin_half_width;
  std::vector<DensityRow> rows;
  for (std::size_t g = 0; g < v_grid.size(); ++g) {
    const double v = v_grid[g];
    if (!(v > 0.0 && v <= 0.1)) fail(ErrorCode::kInvalidArgument, "grid values must lie in (0, 0.1]");
    const double hi = v * (1.0 + w);
    const double lo = v * (1.0 - w);
    // Both V1 and V exceed f0_min * c_d |Z - x|^d, so only Z within rho matter.
    const double rho = std::pow(hi / (cd * spec.f0_min()), 1.0 / d);
    const double ball = cd * std::pow(rho, d);
    constexpr std::int64_t kChunk = 1 << 14;
    const std::int64_t chunks = (opts.samples + kChunk - 1) / kChunk;
    std::vector<MeanAccumulator> single(static_cast<std::size_t>(chunks));
    std::vector<MeanAccumulator> pair(static_cast<std::size_t>(chunks));
    parallel_for(opts.execution, chunks, [&](std::int64_t c) {
      RngStream rng(derive_seed(derive_seed(opts.seed, g), static_cast<std::uint64_t>(c)));
      std::vector<double> z1(static_cast<std::size_t>(d));
      std::vector<double> z2(static_cast<std::size_t>(d));
      std::vector<double> buf(static_cast<std::size_t>(d));
      const std::int64_t end = std::min(opts.samples, (c + 1) * kChunk);
      for (std::int64_t s = c * kChunk; s < end; ++s) {
        sample_ball_around(spec.x, rho, rng, z1);
        sample_ball_around(spec.x, rho, rng, z2);
        const double r1 = std::sqrt(distance2(Metric::kTorus, z1, spec.x));
        const double r2 = std::sqrt(distance2(Metric::kTorus, z2, spec.x));
        double v1 = 0.0;
        double vu = 0.0;
        if (flat_f0) {
          v1 = cd * std::pow(r1, d);
          const double t = std::sqrt(distance2(Metric::kTorus, z1, z2));
          vu = geometry::detail::union_volume(d, cd, r1, r2, t);
        } else {
          v1 = f0_measure(spec, z1, r1, {}, 0.0, opts.integration_points, rng, buf);
          vu = f0_measure(spec, z1, r1, z2, r2, opts.integration_points, rng, buf);
        }
        const double w1 = ball * spec.f1_at(z1);
        const double w2 = ball * spec.f1_at(z2);
        single[static_cast<std::size_t>(c)].add(v1 >= lo && v1 <= hi ? w1 : 0.0);
        pair[static_cast<std::size_t>(c)].add(vu >= lo && vu <= hi ? w1 * w2 : 0.0);
      }
    });
    MeanAccumulator s_all;
    MeanAccumulator p_all;
    for (std::size_t c = 0; c < single.size(); ++c) {
      s_all.merge(single[c]);
      p_all.merge(pair[c]);
    }
    const double width = hi - lo;
    rows.push_back({v, s_all.mean() / width, s_all.standard_error() / width, p_all.mean() / (width * v),
                    p_all.standard_error() / (width * v)});
  }
  return rows;
}

BoundednessReport lemma53_diagnostic(std::span<const MomentEstimate> runs, double first_limit, double second_limit) {
  if (runs.empty()) fail(ErrorCode::kEmptyInput, "boundedness diagnostic needs at least one run");
  BoundednessReport report;
  bool first_up = true;
  bool second_up = true;
  report.max_first = runs[0].first_moment;
  report.max_second = runs[0].second_moment;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    first_up = first_up && runs[r].first_moment >= runs[r - 1].first_moment;
    second_up = second_up && runs[r].second_moment >= runs[r - 1].second_moment;
    report.max_first = std::max(report.max_first, runs[r].first_moment);
    report.max_second = std::max(report.max_second, runs[r].second_moment);
  }
  report.first_diverging = first_up && report.max_first > 3.0 * first_limit;
  report.second_diverging = second_up && report.max_second > 3.0 * second_limit;
  return report;
}

}  // namespace matchvar::voronoi
