#include "matchvar/constants.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss.hpp>
#include <fmt/format.h>

#include "matchvar/error.hpp"
#include "matchvar/geometry.hpp"
#include "matchvar/rng.hpp"

namespace matchvar::constants {

namespace {

constexpr std::int64_t kChunkSize = 1 << 16;
constexpr int kMaxTripleDegree = 40;

void require_dim(int d, int min_d = 1) {
  if (d < min_d) fail(ErrorCode::kInvalidDimension, fmt::format("dimension must be >= {}, got {}", min_d, d));
}

void require_M(int M) {
  if (M < 1) fail(ErrorCode::kInvalidArgument, fmt::format("number of matches must be >= 1, got {}", M));
}

void require_triple(int i, int j, int k) {
  if (i < 0 || j < 0 || k < 0) fail(ErrorCode::kInvalidArgument, "triple indices must be nonnegative");
  if (i + j + k > kMaxTripleDegree) fail(ErrorCode::kInvalidArgument, "triple degree i+j+k is too large");
}

std::int64_t factorial(int n) {
  std::int64_t f = 1;
  for (int m = 2; m <= n; ++m) f *= m;
  return f;
}

// Draws one point of the unit ball and returns (T, |D|^d).
struct TDraw {
  double t;
  double w;
};

TDraw draw_t(int d, double unit_volume, RngStream& rng, std::span<double> buf) {
  geometry::sample_unit_ball(rng, buf);
  double r2 = 0.0;
  double off2 = 0.0;
  for (int c = 0; c < d; ++c) {
    r2 += buf[c] * buf[c];
    const double diff = (c == 0 ? 1.0 : 0.0) - buf[c];
    off2 += diff * diff;
  }
  const double r = std::sqrt(r2);
  const double t = geometry::detail::union_volume(d, unit_volume, 1.0, r, std::sqrt(off2)) / unit_volume;
  return {t, std::pow(r, d)};
}

// Runs `per_sample(TDraw)` over chunked, independently seeded streams and
// reduces the chunk accumulators in chunk order.
template <std::size_t N, typename F>
std::array<MeanAccumulator, N> chunked_mc(int d, const MonteCarloOptions& opts, F&& per_sample,
                                          std::array<double, N * N>* cross = nullptr) {
  require_dim(d);
  if (opts.samples < 1000) fail(ErrorCode::kInvalidArgument, "Monte Carlo needs at least 1000 samples");
  const std::int64_t chunks = (opts.samples + kChunkSize - 1) / kChunkSize;
  std::vector<std::array<MeanAccumulator, N>> partial(static_cast<std::size_t>(chunks));
  std::vector<std::array<double, N * N>> partial_cross(static_cast<std::size_t>(chunks));
  const double unit_volume = geometry::unit_ball_volume(d);
  parallel_for(opts.execution, chunks, [&](std::int64_t c) {
    RngStream rng(derive_seed(opts.seed, static_cast<std::uint64_t>(c)));
    std::vector<double> buf(static_cast<std::size_t>(d));
    const std::int64_t begin = c * kChunkSize;
    const std::int64_t end = std::min(opts.samples, begin + kChunkSize);
    auto& acc = partial[static_cast<std::size_t>(c)];
    auto& xc = partial_cross[static_cast<std::size_t>(c)];
    xc.fill(0.0);
    for (std::int64_t s = begin; s < end; ++s) {
      const std::array<double, N> v = per_sample(draw_t(d, unit_volume, rng, buf));
      for (std::size_t a = 0; a < N; ++a) {
        acc[a].add(v[a]);
        for (std::size_t b = 0; b < N; ++b) xc[a * N + b] += v[a] * v[b];
      }
    }
  });
  std::array<MeanAccumulator, N> total{};
  if (cross) cross->fill(0.0);
  for (std::size_t c = 0; c < partial.size(); ++c) {
    for (std::size_t a = 0; a < N; ++a) total[a].merge(partial[c][a]);
    if (cross) {
      for (std::size_t a = 0; a < N * N; ++a) (*cross)[a] += partial_cross[c][a];
    }
  }
  return total;
}

}  // namespace

std::string_view to_string(Kind kind) noexcept {
  switch (kind) {
    case Kind::kAlphaD: return "alpha_d";
    case Kind::kCijk: return "c_ijk";
    case Kind::kAlphaMd: return "alpha_Md";
  }
  return "?";
}

std::string_view to_string(Method method) noexcept {
  switch (method) {
    case Method::kMonteCarlo: return "monte_carlo";
    case Method::kQuadrature: return "quadrature";
    case Method::kClosedForm: return "closed_form";
  }
  return "?";
}

Kind parse_kind(std::string_view text) {
  if (text == "alpha_d") return Kind::kAlphaD;
  if (text == "c_ijk") return Kind::kCijk;
  if (text == "alpha_Md") return Kind::kAlphaMd;
  fail(ErrorCode::kParse, fmt::format("unknown constant kind '{}'", text));
}

Method parse_method(std::string_view text) {
  if (text == "monte_carlo") return Method::kMonteCarlo;
  if (text == "quadrature") return Method::kQuadrature;
  if (text == "closed_form") return Method::kClosedForm;
  fail(ErrorCode::kParse, fmt::format("unknown constant method '{}'", text));
}

void ConstantEstimate::validate() const {
  require_dim(d);
  if (kind == Kind::kAlphaMd) require_M(M);
  if (kind == Kind::kCijk) require_triple(i, j, k);
  if (!(value >= 0.0) || !std::isfinite(value)) fail(ErrorCode::kDomain, "constant value must be finite and >= 0");
  if (!(error_bound >= 0.0)) fail(ErrorCode::kDomain, "error bound must be >= 0");
  if (method == Method::kClosedForm && error_bound != 0.0) {
    fail(ErrorCode::kDomain, "closed-form constants carry no error");
  }
}

ConstantKey key_of(const ConstantEstimate& e) noexcept {
  const bool has_m = e.kind == Kind::kAlphaMd;
  const bool has_ijk = e.kind == Kind::kCijk;
  return {e.kind, e.d, has_m ? e.M : 0, has_ijk ? e.i : 0, has_ijk ? e.j : 0, has_ijk ? e.k : 0, e.method};
}

void ConstantsTable::put(const ConstantEstimate& e) {
  e.validate();
  entries_.insert_or_assign(key_of(e), e);
}

std::optional<ConstantEstimate> ConstantsTable::find(Kind kind, Method method, int d, int M, int i, int j,
                                                     int k) const {
  ConstantEstimate probe;
  probe.kind = kind;
  probe.method = method;
  probe.d = d;
  probe.M = M;
  probe.i = i;
  probe.j = j;
  probe.k = k;
  const auto it = entries_.find(key_of(probe));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::optional<ConstantEstimate> ConstantsTable::find_best(Kind kind, int d, int M, int i, int j, int k) const {
  for (Method m : {Method::kClosedForm, Method::kQuadrature, Method::kMonteCarlo}) {
    if (auto e = find(kind, m, d, M, i, j, k)) return e;
  }
  return std::nullopt;
}

std::vector<ConstantEstimate> ConstantsTable::entries() const {
  std::vector<ConstantEstimate> out;
  out.reserve(entries_.size());
  for (const auto& [key, e] : entries_) out.push_back(e);
  return out;
}

std::vector<Triple> alpha_Md_triples(int M) {
  require_M(M);
  std::vector<Triple> out;
  for (int k = 0; k <= M - 1; ++k) {
    for (int i = 0; i + k <= M - 1; ++i) {
      for (int j = 0; j + k <= M - 1; ++j) {
        // (n+1)!/(i!j!k!) = (n+1) * binom(n, i) * binom(n - i, j), exact in 64 bits here.
        const int n = i + j + k;
        std::uint64_t b1 = 1;
        for (int m = 1; m <= i; ++m) b1 = b1 * static_cast<std::uint64_t>(n - i + m) / static_cast<std::uint64_t>(m);
        std::uint64_t b2 = 1;
        for (int m = 1; m <= j; ++m) b2 = b2 * static_cast<std::uint64_t>(n - i - j + m) / static_cast<std::uint64_t>(m);
        out.push_back({i, j, k, static_cast<double>(static_cast<std::uint64_t>(n + 1) * b1 * b2)});
      }
    }
  }
  return out;
}

double triple_polynomial(int i, int j, int k, double v1, double v2) noexcept {
  double p = 1.0;
  if (i > 0) p *= std::pow(1.0 - v1, i);
  if (j > 0) p *= std::pow(1.0 - v2, j);
  if (k > 0) p *= std::pow(v1 + v2 - 1.0, k);
  return p;
}

double t_statistic(std::span<const double> ball_point) {
  const int d = static_cast<int>(ball_point.size());
  require_dim(d);
  double r2 = 0.0;
  double off2 = 0.0;
  for (int c = 0; c < d; ++c) {
    r2 += ball_point[c] * ball_point[c];
    const double diff = (c == 0 ? 1.0 : 0.0) - ball_point[c];
    off2 += diff * diff;
  }
  if (r2 > 1.0 + 1e-12) fail(ErrorCode::kDomain, "point lies outside the unit ball");
  const double cd = geometry::unit_ball_volume(d);
  return geometry::detail::union_volume(d, cd, 1.0, std::sqrt(r2), std::sqrt(off2)) / cd;
}

ConstantEstimate alpha_d_monte_carlo(int d, const MonteCarloOptions& opts) {
  const auto acc = chunked_mc<1>(d, opts, [](TDraw s) { return std::array{2.0 / (s.t * s.t)}; });
  ConstantEstimate e;
  e.kind = Kind::kAlphaD;
  e.method = Method::kMonteCarlo;
  e.d = d;
  e.value = acc[0].mean();
  e.error_bound = acc[0].standard_error();
  e.sample_size = opts.samples;
  e.seed = opts.seed;
  return e;
}

ConstantEstimate alpha_Md_monte_carlo(int M, int d, const MonteCarloOptions& opts) {
  const std::vector<Triple> triples = alpha_Md_triples(M);
  const auto acc = chunked_mc<1>(d, opts, [&](TDraw s) {
    const double a = 1.0 / s.t;
    const double b = s.w / s.t;
    double sum = 0.0;
    for (const Triple& tr : triples) sum += tr.weight * triple_polynomial(tr.i, tr.j, tr.k, a, b);
    return std::array{2.0 * a * a * sum};
  });
  ConstantEstimate e;
  e.kind = Kind::kAlphaMd;
  e.method = Method::kMonteCarlo;
  e.d = d;
  e.M = M;
  e.value = acc[0].mean();
  e.error_bound = acc[0].standard_error();
  e.sample_size = opts.samples;
  e.seed = opts.seed;
  return e;
}

ConstantEstimate c_ijk_monte_carlo(int i, int j, int k, int d, const MonteCarloOptions& opts) {
  require_triple(i, j, k);
  std::array<double, 4> cross{};
  const auto acc = chunked_mc<2>(
      d, opts,
      [&](TDraw s) {
        const double a = 1.0 / s.t;
        const double b = s.w / s.t;
        const double num = (triple_polynomial(i, j, k, a, b) + triple_polynomial(i, j, k, b, a)) * a * a;
        return std::array{num, 2.0 * a * a};
      },
      &cross);
  const double n = static_cast<double>(acc[0].count);
  const double mx = acc[0].mean();
  const double my = acc[1].mean();
  const double ratio = mx / my;
  // Delta method for a ratio of means.
  const double vx = std::max(0.0, acc[0].sum_sq / n - mx * mx);
  const double vy = std::max(0.0, acc[1].sum_sq / n - my * my);
  const double cxy = cross[1] / n - mx * my;
  const double var = std::max(0.0, (vx - 2.0 * ratio * cxy + ratio * ratio * vy) / (my * my));
  ConstantEstimate e;
  e.kind = Kind::kCijk;
  e.method = Method::kMonteCarlo;
  e.d = d;
  e.i = i;
  e.j = j;
  e.k = k;
  e.value = ratio;
  e.error_bound = std::sqrt(var / n);
  e.sample_size = opts.samples;
  e.seed = opts.seed;
  return e;
}

boost::rational<std::int64_t> c_ijk_exact_d1(int i, int j, int k) {
  using Q = boost::rational<std::int64_t>;
  require_triple(i, j, k);
  const int zeros = (i == 0) + (j == 0) + (k == 0);
  if (zeros == 3) return Q(1);
  if (zeros == 0) return Q(0);
  if (zeros == 1) {
    // The two nonzero indices a, b give (1/3) a! b! / (a + b + 1)!.
    const int a = i == 0 ? j : i;
    const int b = k == 0 ? j : k;
    return Q(1, 3) * Q(factorial(a) * factorial(b), factorial(a + b + 1));
  }
  const int x = std::max({i, j, k});
  return Q(2, 3) * Q(1, x + 1);
}

ConstantEstimate c_ijk_closed_form_d1(int i, int j, int k) {
  const auto q = c_ijk_exact_d1(i, j, k);
  ConstantEstimate e;
  e.kind = Kind::kCijk;
  e.method = Method::kClosedForm;
  e.d = 1;
  e.i = i;
  e.j = j;
  e.k = k;
  e.value = boost::rational_cast<double>(q);
  return e;
}

boost::rational<std::int64_t> alpha_M1_exact_sum(int M) {
  using Q = boost::rational<std::int64_t>;
  require_M(M);
  if (M > 10) fail(ErrorCode::kInvalidArgument, "exact d = 1 sum is limited to M <= 10 (64-bit factorials)");
  Q sum(0);
  for (const Triple& t : alpha_Md_triples(M)) {
    const int n = t.i + t.j + t.k;
    const Q weight(factorial(n + 1), factorial(t.i) * factorial(t.j) * factorial(t.k));
    sum += c_ijk_exact_d1(t.i, t.j, t.k) * weight;
  }
  return Q(3, 2) * sum;
}

boost::rational<std::int64_t> alpha_M1_formula(int M) {
  require_M(M);
  return boost::rational<std::int64_t>(static_cast<std::int64_t>(M) * (2 * M + 1), 2);
}

void GridSpec::validate() const {
  if (base_resolution < 2) fail(ErrorCode::kInvalidArgument, "quadrature base resolution must be >= 2");
  if (refinement_depth < 0 || refinement_depth > 6) {
    fail(ErrorCode::kInvalidArgument, "quadrature refinement depth must lie in [0, 6]");
  }
}

namespace {

using Gauss = boost::math::quadrature::gauss<double, 20>;

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Composite Gauss-Legendre rule with `panels` equal panels on [a, b].
Rule composite_rule(double a, double b, int panels) {
  const auto& half_nodes = Gauss::abscissa();
  const auto& half_weights = Gauss::weights();
  std::vector<double> ref_nodes;
  std::vector<double> ref_weights;
  for (std::size_t q = 0; q < half_nodes.size(); ++q) {
    ref_nodes.push_back(-half_nodes[q]);
    ref_weights.push_back(half_weights[q]);
    if (half_nodes[q] != 0.0) {
      ref_nodes.push_back(half_nodes[q]);
      ref_weights.push_back(half_weights[q]);
    }
  }
  Rule rule;
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (std::size_t q = 0; q < ref_nodes.size(); ++q) {
      rule.nodes.push_back(mid + 0.5 * h * ref_nodes[q]);
      rule.weights.push_back(0.5 * h * ref_weights[q]);
    }
  }
  return rule;
}

// One pass of the ray-parametrized rule with `panels` panels per axis.
std::vector<double> density_moments_once(int d, std::span<const Triple> triples, int panels, Execution exec) {
  int max_i = 0;
  int max_j = 0;
  int max_k = 0;
  for (const Triple& t : triples) {
    max_i = std::max({max_i, t.i, t.j});
    max_j = std::max({max_j, t.i, t.j});
    max_k = std::max(max_k, t.k);
  }
  const double cd = geometry::unit_ball_volume(d);
  // u = s^d on [0, 1/2] keeps the radii u^{1/d} smooth; the half u > 1/2 is
  // folded onto this one by swapping the roles of the two balls.
  const Rule s_rule = composite_rule(0.0, std::pow(0.5, 1.0 / d), panels);
  const Rule g_rule = composite_rule(0.0, std::numbers::pi, panels);
  std::vector<double> angle_weight(g_rule.nodes.size());
  std::vector<double> half_sin2(g_rule.nodes.size());
  for (std::size_t q = 0; q < g_rule.nodes.size(); ++q) {
    angle_weight[q] = g_rule.weights[q] * geometry::angle_density(d, g_rule.nodes[q]);
    const double s = std::sin(0.5 * g_rule.nodes[q]);
    half_sin2[q] = s * s;
  }
  const std::size_t nt = triples.size();
  std::vector<std::vector<double>> rows(s_rule.nodes.size(), std::vector<double>(nt, 0.0));
  parallel_for(exec, static_cast<std::int64_t>(s_rule.nodes.size()), [&](std::int64_t row) {
    const double s = s_rule.nodes[static_cast<std::size_t>(row)];
    const double u = std::pow(s, d);
    const double jac = s_rule.weights[static_cast<std::size_t>(row)] * d * std::pow(s, d - 1);
    const double r1 = s;
    const double r2 = std::pow(1.0 - u, 1.0 / d);
    std::vector<double> p1(static_cast<std::size_t>(max_i + 1));
    std::vector<double> p2(static_cast<std::size_t>(max_j + 1));
    std::vector<double> p3(static_cast<std::size_t>(max_k + 1));
    std::vector<double> acc(nt, 0.0);
    for (std::size_t q = 0; q < g_rule.nodes.size(); ++q) {
      const double diff = r1 - r2;
      const double t = std::sqrt(std::max(0.0, diff * diff + 4.0 * r1 * r2 * half_sin2[q]));
      const double h = geometry::detail::union_volume(d, cd, r1, r2, t) / cd;
      const double v1 = u / h;
      const double v2 = (1.0 - u) / h;
      p1[0] = p2[0] = p3[0] = 1.0;
      for (std::size_t e = 1; e < p1.size(); ++e) p1[e] = p1[e - 1] * (1.0 - v1);
      for (std::size_t e = 1; e < p2.size(); ++e) p2[e] = p2[e - 1] * (1.0 - v2);
      for (std::size_t e = 1; e < p3.size(); ++e) p3[e] = p3[e - 1] * (v1 + v2 - 1.0);
      const double base = angle_weight[q] / (h * h);
      for (std::size_t n = 0; n < nt; ++n) {
        const Triple& tr = triples[n];
        const double folded = p1[tr.i] * p2[tr.j] + p1[tr.j] * p2[tr.i];
        acc[n] += base * folded * p3[tr.k];
      }
    }
    for (std::size_t n = 0; n < nt; ++n) rows[static_cast<std::size_t>(row)][n] = jac * acc[n];
  });
  std::vector<double> out(nt, 0.0);
  std::vector<double> column(rows.size());
  for (std::size_t n = 0; n < nt; ++n) {
    for (std::size_t r = 0; r < rows.size(); ++r) column[r] = rows[r][n];
    out[n] = pairwise_sum(column);
  }
  return out;
}

int panels_for(int resolution) { return std::max(1, (resolution + 19) / 20); }

}  // namespace

std::vector<QuadratureValue> density_moments(int d, std::span<const Triple> triples, const GridSpec& grid,
                                             Execution exec) {
  require_dim(d, 2);
  grid.validate();
  for (const Triple& t : triples) require_triple(t.i, t.j, t.k);
  int panels = panels_for(grid.base_resolution);
  std::vector<double> previous = density_moments_once(d, triples, panels, exec);
  std::vector<QuadratureValue> out(triples.size());
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = {previous[n], 0.0, panels * 20};
  for (int level = 0; level < grid.refinement_depth; ++level) {
    panels *= 2;
    const std::vector<double> next = density_moments_once(d, triples, panels, exec);
    for (std::size_t n = 0; n < out.size(); ++n) out[n] = {next[n], std::fabs(next[n] - previous[n]), panels * 20};
    previous = next;
  }
  return out;
}

double density_moment_midpoint(int d, int i, int j, int k, int resolution, Execution exec) {
  require_dim(d, 2);
  require_triple(i, j, k);
  if (resolution < 2) fail(ErrorCode::kInvalidArgument, "midpoint resolution must be >= 2");
  const double h = 1.0 / resolution;
  std::vector<double> rows(static_cast<std::size_t>(resolution), 0.0);
  parallel_for(exec, resolution, [&](std::int64_t a) {
    const double v1 = (static_cast<double>(a) + 0.5) * h;
    double acc = 0.0;
    for (int b = 0; b < resolution; ++b) {
      const double v2 = (b + 0.5) * h;
      if (v1 + v2 <= 1.0) continue;
      acc += triple_polynomial(i, j, k, v1, v2) * geometry::union_density_at_one(d, v1, v2);
    }
    rows[static_cast<std::size_t>(a)] = acc * h * h;
  });
  return pairwise_sum(rows);
}

ConstantEstimate alpha_d_quadrature(int d, const GridSpec& grid, Execution exec) {
  const std::array<Triple, 1> one{Triple{0, 0, 0, 1.0}};
  const QuadratureValue q = density_moments(d, one, grid, exec)[0];
  ConstantEstimate e;
  e.kind = Kind::kAlphaD;
  e.method = Method::kQuadrature;
  e.d = d;
  e.value = q.value;
  e.error_bound = q.error_bound;
  e.sample_size = q.resolution;
  return e;
}

std::vector<ConstantEstimate> c_ijk_quadrature_all(int M, int d, const GridSpec& grid,
                                                   const ConstantEstimate& alpha_d, Execution exec) {
  if (alpha_d.kind != Kind::kAlphaD || alpha_d.d != d) {
    fail(ErrorCode::kInvalidArgument, "c_ijk quadrature needs the alpha(d) entry of the same dimension");
  }
  const std::vector<Triple> triples = alpha_Md_triples(M);
  const std::vector<QuadratureValue> q = density_moments(d, triples, grid, exec);
  std::vector<ConstantEstimate> out;
  out.reserve(triples.size());
  for (std::size_t n = 0; n < triples.size(); ++n) {
    const double integral = q[n].value;
    const double gap = q[n].error_bound;
    ConstantEstimate e;
    e.kind = Kind::kCijk;
    e.method = Method::kQuadrature;
    e.d = d;
    e.i = triples[n].i;
    e.j = triples[n].j;
    e.k = triples[n].k;
    e.value = integral / alpha_d.value;
    e.error_bound = gap / alpha_d.value + integral * alpha_d.error_bound / (alpha_d.value * alpha_d.value);
    e.sample_size = q[n].resolution;
    out.push_back(e);
  }
  return out;
}

ConstantEstimate c_ijk_quadrature(int d, int i, int j, int k, const GridSpec& grid, const ConstantEstimate& alpha_d,
                                  Execution exec) {
  require_triple(i, j, k);
  if (alpha_d.kind != Kind::kAlphaD || alpha_d.d != d) {
    fail(ErrorCode::kInvalidArgument, "c_ijk quadrature needs the alpha(d) entry of the same dimension");
  }
  const std::array<Triple, 1> one{Triple{i, j, k, 1.0}};
  const QuadratureValue q = density_moments(d, one, grid, exec)[0];
  const double integral = q.value;
  ConstantEstimate e;
  e.kind = Kind::kCijk;
  e.method = Method::kQuadrature;
  e.d = d;
  e.i = i;
  e.j = j;
  e.k = k;
  e.value = integral / alpha_d.value;
  e.error_bound =
      q.error_bound / alpha_d.value + integral * alpha_d.error_bound / (alpha_d.value * alpha_d.value);
  e.sample_size = q.resolution;
  return e;
}

ConstantEstimate alpha_Md_quadrature(int M, int d, const GridSpec& grid, Execution exec) {
  const std::vector<Triple> triples = alpha_Md_triples(M);
  const std::vector<QuadratureValue> q = density_moments(d, triples, grid, exec);
  double value = 0.0;
  double gap = 0.0;
  for (std::size_t n = 0; n < triples.size(); ++n) {
    value += triples[n].weight * q[n].value;
    gap += triples[n].weight * q[n].error_bound;
  }
  ConstantEstimate e;
  e.kind = Kind::kAlphaMd;
  e.method = Method::kQuadrature;
  e.d = d;
  e.M = M;
  e.value = value;
  e.error_bound = gap;
  e.sample_size = q.empty() ? 0 : q[0].resolution;
  return e;
}

ConstantEstimate alpha_Md(int M, int d, const ConstantsTable& table) {
  require_M(M);
  require_dim(d);
  ConstantEstimate e;
  e.kind = Kind::kAlphaMd;
  e.d = d;
  e.M = M;
  if (d == 1) {
    e.method = Method::kClosedForm;
    if (M <= 10) {
      e.value = boost::rational_cast<double>(alpha_M1_exact_sum(M));
    } else {
      e.value = static_cast<double>(M) * (2.0 * M + 1.0) / 2.0;
    }
    return e;
  }
  const auto alpha = table.find_best(Kind::kAlphaD, d);
  if (alpha) {
    double sum = 0.0;
    double sum_err = 0.0;
    bool complete = true;
    for (const Triple& t : alpha_Md_triples(M)) {
      const auto c = table.find_best(Kind::kCijk, d, 0, t.i, t.j, t.k);
      if (!c) {
        complete = false;
        break;
      }
      sum += t.weight * c->value;
      sum_err += t.weight * c->error_bound;
    }
    if (complete) {
      e.method = M == 1 ? alpha->method : Method::kQuadrature;
      e.value = alpha->value * sum;
      e.error_bound = alpha->error_bound * sum + alpha->value * sum_err;
      e.sample_size = alpha->sample_size;
      return e;
    }
  }
  if (auto stored = table.find_best(Kind::kAlphaMd, d, M)) return *stored;
  if (M == 1 && alpha) {
    e.method = alpha->method;
    e.value = alpha->value;
    e.error_bound = alpha->error_bound;
    e.sample_size = alpha->sample_size;
    e.seed = alpha->seed;
    return e;
  }
  fail(ErrorCode::kMissingConstants, fmt::format("no constants available for alpha(M={}, d={})", M, d));
}

std::optional<double> reference_alpha_d(int d) {
  static constexpr std::array<double, 10> kValues{1.50, 1.28, 1.18, 1.12, 1.08, 1.06, 1.04, 1.03, 1.02, 1.02};
  if (d < 1 || d > 10) return std::nullopt;
  return kValues[static_cast<std::size_t>(d - 1)];
}

std::optional<double> reference_alpha_Md(int M, int d) {
  // Rows M = 2..10, columns d = 2..10.
  static constexpr double kValues[9][9] = {
      {4.57, 4.37, 4.26, 4.18, 4.13, 4.09, 4.07, 4.05, 4.07},
      {9.86, 9.57, 9.40, 9.28, 9.21, 9.14, 9.10, 9.08, 9.17},
      {17.15, 16.77, 16.54, 16.38, 16.28, 16.19, 16.15, 16.10, 16.31},
      {26.45, 25.97, 25.67, 25.48, 25.36, 25.23, 25.18, 25.13, 25.49},
      {37.74, 37.16, 36.83, 36.58, 36.45, 36.27, 36.22, 36.16, 36.71},
      {51.03, 50.34, 49.98, 49.68, 49.53, 49.32, 49.25, 49.19, 49.97},
      {66.32, 65.54, 65.12, 64.79, 64.62, 64.36, 64.29, 64.22, 65.27},
      {83.60, 82.73, 82.27, 81.89, 81.71, 81.40, 81.33, 81.25, 82.62},
      {102.89, 101.92, 101.43, 100.99, 100.81, 100.43, 100.37, 100.28, 102.00},
  };
  if (M == 1) return reference_alpha_d(d);
  if (d == 1 && M >= 1) return static_cast<double>(M) * (2.0 * M + 1.0) / 2.0;
  if (M < 2 || M > 10 || d < 2 || d > 10) return std::nullopt;
  return kValues[M - 2][d - 2];
}

}  // namespace matchvar::constants
