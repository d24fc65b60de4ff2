#include "matchvar/matching.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include "matchvar/error.hpp"
#include "matchvar/kdtree.hpp"
#include "matchvar/regression.hpp"

namespace matchvar::matching {

namespace {

struct Groups {
  std::vector<std::size_t> control;
  std::vector<std::size_t> treated;
};

Groups split_groups(const Dataset& data) {
  Groups g;
  for (std::size_t i = 0; i < data.n(); ++i) (data.w[i] == 1 ? g.treated : g.control).push_back(i);
  return g;
}

void require_groups(const Groups& g, std::size_t need, const char* what) {
  if (g.control.size() < need || g.treated.size() < need) {
    fail(ErrorCode::kInsufficientGroup,
         fmt::format("{} needs at least {} units per group, found n0 = {}, n1 = {}", what, need, g.control.size(),
                     g.treated.size()));
  }
}

// Counts and imputations from filled match sets.
void finish_matches(const Dataset& data, MatchResult& r) {
  const std::size_t n = data.n();
  r.times_used.assign(n, 0);
  r.y0_hat.resize(n);
  r.y1_hat.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j : r.matches_of(i)) {
      ++r.times_used[j];
      s += data.y[j];
    }
    const double imputed = s / r.M;
    if (data.w[i] == 1) {
      r.y1_hat[i] = data.y[i];
      r.y0_hat[i] = imputed;
    } else {
      r.y0_hat[i] = data.y[i];
      r.y1_hat[i] = imputed;
    }
  }
}

void check_M(int M) {
  if (M < 1) fail(ErrorCode::kInvalidArgument, "M must be >= 1");
}

}  // namespace

MatchResult find_matches(const Dataset& data, int M, Execution exec) {
  check_M(M);
  data.validate();
  const Groups g = split_groups(data);
  require_groups(g, static_cast<std::size_t>(M), "matching");
  const KdTree control_tree(data.x, g.control);
  const KdTree treated_tree(data.x, g.treated);
  MatchResult r;
  r.M = M;
  r.matches.resize(data.n() * static_cast<std::size_t>(M));
  parallel_for(exec, static_cast<std::int64_t>(data.n()), [&](std::int64_t row) {
    const auto i = static_cast<std::size_t>(row);
    std::vector<Neighbor> nb;
    (data.w[i] == 1 ? control_tree : treated_tree).nearest(data.x[i], static_cast<std::size_t>(M), kNoExclusion, nb);
    for (std::size_t m = 0; m < nb.size(); ++m) r.matches[i * static_cast<std::size_t>(M) + m] = nb[m].index;
  });
  finish_matches(data, r);
  return r;
}

MatchResult find_matches_bruteforce(const Dataset& data, int M) {
  check_M(M);
  data.validate();
  const Groups g = split_groups(data);
  require_groups(g, static_cast<std::size_t>(M), "matching");
  MatchResult r;
  r.M = M;
  r.matches.resize(data.n() * static_cast<std::size_t>(M));
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto nb = nearest_bruteforce(data.x, data.w[i] == 1 ? g.control : g.treated, data.x[i],
                                       static_cast<std::size_t>(M));
    for (std::size_t m = 0; m < nb.size(); ++m) r.matches[i * static_cast<std::size_t>(M) + m] = nb[m].index;
  }
  finish_matches(data, r);
  return r;
}

TauForms tau_hat_forms(const Dataset& data, const MatchResult& matches) {
  const std::size_t n = data.n();
  if (matches.n() != n) fail(ErrorCode::kInvalidArgument, "match result does not belong to this dataset");
  std::vector<double> weighted(n);
  std::vector<double> imputed(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double sign = data.w[i] == 1 ? 1.0 : -1.0;
    weighted[i] = sign * (1.0 + static_cast<double>(matches.times_used[i]) / matches.M) * data.y[i];
    imputed[i] = matches.y1_hat[i] - matches.y0_hat[i];
  }
  const double dn = static_cast<double>(n);
  return {pairwise_sum(weighted) / dn, pairwise_sum(imputed) / dn};
}

double tau_hat(const Dataset& data, const MatchResult& matches) {
  const TauForms f = tau_hat_forms(data, matches);
  double scale = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    scale += (1.0 + static_cast<double>(matches.times_used[i]) / matches.M) * std::fabs(data.y[i]);
  }
  scale = std::max(scale / static_cast<double>(data.n()), 1e-300);
  if (std::fabs(f.weighting - f.imputation) > 1e-12 * scale) {
    fail(ErrorCode::kDomain, fmt::format("weighting form {} and imputation form {} disagree", f.weighting,
                                         f.imputation));
  }
  return f.weighting;
}

double bias_correction(const Dataset& data, const MatchResult& matches, const RegressionSpec& spec) {
  const std::size_t n = data.n();
  bool any_gap = false;
  for (std::size_t i = 0; i < n && !any_gap; ++i) {
    for (std::size_t j : matches.matches_of(i)) {
      if (squared_distance(data.x[i], data.x[j]) != 0.0) {
        any_gap = true;
        break;
      }
    }
  }
  if (!any_gap) return 0.0;
  const Groups g = split_groups(data);
  const regression::PolynomialFit mu0 = regression::fit_polynomial(data.x, data.y, g.control, spec.degree);
  const regression::PolynomialFit mu1 = regression::fit_polynomial(data.x, data.y, g.treated, spec.degree);
  std::vector<double> terms(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Discrepancy is measured with the regression of the opposite group.
    const regression::PolynomialFit& mu = data.w[i] == 1 ? mu0 : mu1;
    const double at_i = mu.predict(data.x[i]);
    double s = 0.0;
    for (std::size_t j : matches.matches_of(i)) s += at_i - mu.predict(data.x[j]);
    terms[i] = (data.w[i] == 1 ? 1.0 : -1.0) * s / matches.M;
  }
  return pairwise_sum(terms) / static_cast<double>(n);
}

std::vector<double> conditional_variance_nn(const Dataset& data, int J_var, Execution exec) {
  if (J_var < 1) fail(ErrorCode::kInvalidArgument, "J_var must be >= 1");
  const Groups g = split_groups(data);
  require_groups(g, static_cast<std::size_t>(J_var) + 1, "conditional variance");
  const KdTree control_tree(data.x, g.control);
  const KdTree treated_tree(data.x, g.treated);
  std::vector<double> out(data.n());
  const double shrink = static_cast<double>(J_var) / (J_var + 1.0);
  parallel_for(exec, static_cast<std::int64_t>(data.n()), [&](std::int64_t row) {
    const auto i = static_cast<std::size_t>(row);
    std::vector<Neighbor> nb;
    (data.w[i] == 1 ? treated_tree : control_tree).nearest(data.x[i], static_cast<std::size_t>(J_var), i, nb);
    double mean = 0.0;
    for (const Neighbor& m : nb) mean += data.y[m.index];
    mean /= static_cast<double>(nb.size());
    const double dev = data.y[i] - mean;
    out[i] = shrink * dev * dev;
  });
  return out;
}

double v_E(std::span<const int> times_used, int M, std::span<const double> sigma2) {
  check_M(M);
  if (times_used.size() != sigma2.size()) fail(ErrorCode::kInvalidArgument, "one variance per unit is required");
  if (times_used.empty()) fail(ErrorCode::kEmptyInput, "V^E of an empty sample");
  std::vector<double> terms(times_used.size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const double f = 1.0 + static_cast<double>(times_used[i]) / M;
    terms[i] = f * f * sigma2[i];
  }
  return pairwise_sum(terms) / static_cast<double>(terms.size());
}

double v_E(const MatchResult& matches, std::span<const double> sigma2) {
  return v_E(matches.times_used, matches.M, sigma2);
}

std::vector<double> estimate_propensity(const Dataset& data, const PropensitySpec& spec) {
  const std::size_t n = data.n();
  const std::size_t n1 = data.n1();
  if (n1 == 0 || n1 == n) fail(ErrorCode::kDegeneratePropensity, "all units share one treatment status");
  switch (spec.method) {
    case PropensityMethod::kOracle:
      if (spec.oracle.size() != n) fail(ErrorCode::kInvalidArgument, "oracle propensity needs one value per unit");
      return spec.oracle;
    case PropensityMethod::kConstant:
      return std::vector<double>(n, data.treated_fraction());
    case PropensityMethod::kLogistic:
      if (const auto beta = regression::fit_logistic(data.x, data.w)) {
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; ++i) {
          double eta = (*beta)[0];
          for (int c = 0; c < data.d(); ++c) eta += (*beta)[c + 1] * data.x[i][static_cast<std::size_t>(c)];
          out[i] = regression::logistic(eta);
        }
        return out;
      }
      [[fallthrough]];
    case PropensityMethod::kKnn: {
      const std::size_t k = std::min(
          n, spec.knn_k > 0 ? static_cast<std::size_t>(spec.knn_k)
                            : std::max<std::size_t>(10, static_cast<std::size_t>(std::sqrt(static_cast<double>(n)))));
      const KdTree tree(data.x);
      std::vector<double> out(n);
      std::vector<Neighbor> nb;
      for (std::size_t i = 0; i < n; ++i) {
        tree.nearest(data.x[i], k, kNoExclusion, nb);
        double treated = 0.0;
        for (const Neighbor& m : nb) treated += data.w[m.index];
        out[i] = treated / static_cast<double>(nb.size());
      }
      return out;
    }
  }
  return {};
}

double variance_weight(double alpha, int M, double e, bool treated) noexcept {
  const double p = treated ? e : 1.0 - e;
  const double m = M;
  return (alpha / p + (alpha - m * m - m) * p + (2.0 * m * m + m - 2.0 * alpha)) / (m * m);
}

VarianceComponents sigma2_Md_plugin(const Dataset& data, const MatchResult& matches, double alpha,
                                    const PropensitySpec& e_spec, const SigmaSpec& sigma_spec,
                                    const VTauSpec& vtau_spec) {
  const std::size_t n = data.n();
  if (matches.n() != n) fail(ErrorCode::kInvalidArgument, "match result does not belong to this dataset");
  if (!(alpha > 0.0)) fail(ErrorCode::kMissingConstants, "alpha(M, d) must be positive");
  VarianceComponents vc;
  vc.alpha_Md = alpha;
  vc.e_hat = estimate_propensity(data, e_spec);
  for (double& e : vc.e_hat) e = std::clamp(e, kPropensityClamp, 1.0 - kPropensityClamp);

  vc.sigma2_0.resize(n);
  vc.sigma2_1.resize(n);
  vc.sigma2_own.resize(n);
  if (sigma_spec.method == SigmaMethod::kOracle) {
    if (sigma_spec.oracle0.size() != n || sigma_spec.oracle1.size() != n) {
      fail(ErrorCode::kInvalidArgument, "oracle variances need one value per unit and group");
    }
    vc.sigma2_0 = sigma_spec.oracle0;
    vc.sigma2_1 = sigma_spec.oracle1;
    for (std::size_t i = 0; i < n; ++i) vc.sigma2_own[i] = data.w[i] == 1 ? vc.sigma2_1[i] : vc.sigma2_0[i];
  } else {
    vc.sigma2_own = conditional_variance_nn(data, sigma_spec.J_var);
    for (std::size_t i = 0; i < n; ++i) {
      double cross = 0.0;
      for (std::size_t j : matches.matches_of(i)) cross += vc.sigma2_own[j];
      cross /= matches.M;
      (data.w[i] == 1 ? vc.sigma2_1[i] : vc.sigma2_0[i]) = vc.sigma2_own[i];
      (data.w[i] == 1 ? vc.sigma2_0[i] : vc.sigma2_1[i]) = cross;
    }
  }

  vc.v_E = v_E(matches, vc.sigma2_own);
  std::vector<double> terms(n);
  for (std::size_t i = 0; i < n; ++i) {
    terms[i] = vc.sigma2_1[i] * variance_weight(alpha, matches.M, vc.e_hat[i], true) +
               vc.sigma2_0[i] * variance_weight(alpha, matches.M, vc.e_hat[i], false);
  }
  const double noise_part = pairwise_sum(terms) / static_cast<double>(n);

  switch (vtau_spec.method) {
    case VTauMethod::kZero: vc.v_tauX = 0.0; break;
    case VTauMethod::kOracle: vc.v_tauX = vtau_spec.oracle; break;
    case VTauMethod::kHeuristic: {
      // Spread of unit-level imputed effects minus their imputation noise.
      const double tau = tau_hat(data, matches);
      std::vector<double> spread(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double dev = matches.y1_hat[i] - matches.y0_hat[i] - tau;
        const double own = vc.sigma2_own[i];
        const double other = data.w[i] == 1 ? vc.sigma2_0[i] : vc.sigma2_1[i];
        spread[i] = dev * dev - own - other / matches.M;
      }
      vc.v_tauX = std::max(0.0, pairwise_sum(spread) / static_cast<double>(n));
      break;
    }
  }
  vc.v_M = vc.v_E + vc.v_tauX;
  vc.sigma2 = std::max(0.0, vc.v_tauX + noise_part);
  return vc;
}

VarianceComponents sigma2_Md_plugin(const Dataset& data, const MatchResult& matches,
                                    const constants::ConstantsTable& table, const PropensitySpec& e_spec,
                                    const SigmaSpec& sigma_spec, const VTauSpec& vtau_spec) {
  const constants::ConstantEstimate a = constants::alpha_Md(matches.M, data.d(), table);
  return sigma2_Md_plugin(data, matches, a.value, e_spec, sigma_spec, vtau_spec);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorCode::kDomain, "normal quantile needs p in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

Interval confidence_interval(double tau_bc, double sigma2, std::size_t n, double level) {
  if (!(sigma2 >= 0.0)) fail(ErrorCode::kDomain, "variance must be >= 0");
  if (!(level > 0.0 && level < 1.0)) fail(ErrorCode::kDomain, "confidence level must lie in (0, 1)");
  if (n == 0) fail(ErrorCode::kEmptyInput, "interval needs n >= 1");
  const double half = normal_quantile(0.5 * (1.0 + level)) * std::sqrt(sigma2 / static_cast<double>(n));
  return {tau_bc - half, tau_bc + half};
}

EstimateReport estimate(const Dataset& data, const EstimateOptions& opts, const constants::ConstantsTable* table) {
  EstimateReport rep;
  rep.M = opts.M;
  rep.d = data.d();
  rep.n = data.n();
  rep.n0 = data.n0();
  rep.n1 = data.n1();
  rep.level = opts.level;
  const MatchResult matches = find_matches(data, opts.M, opts.execution);
  rep.tau_hat = tau_hat(data, matches);
  rep.B_hat = opts.bias_correct ? bias_correction(data, matches, opts.regression) : 0.0;
  rep.tau_bc = rep.tau_hat - rep.B_hat;
  if (opts.with_variance) {
    if (!table) fail(ErrorCode::kMissingConstants, "variance estimation needs a constants table");
    rep.alpha = constants::alpha_Md(opts.M, data.d(), *table);
    rep.variance = sigma2_Md_plugin(data, matches, rep.alpha->value, opts.propensity, opts.sigma, opts.vtau);
    rep.ci = confidence_interval(rep.tau_bc, rep.variance->sigma2, data.n(), opts.level);
  }
  return rep;
}

}  // namespace matchvar::matching
