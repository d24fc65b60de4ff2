#include "matchvar/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <omp.h>

#include "matchvar/error.hpp"

namespace matchvar {

namespace {
int default_threads() {
  static const int value = omp_get_max_threads();
  return value;
}
}  // namespace

void set_thread_cap(int threads) {
  const int baseline = default_threads();
  omp_set_num_threads(threads > 0 ? threads : baseline);
}

int max_threads() { return omp_get_max_threads(); }

double pairwise_sum(std::span<const double> values) noexcept {
  constexpr std::size_t kBlock = 32;
  if (values.size() <= kBlock) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double MeanAccumulator::standard_error() const noexcept {
  if (count < 2) return 0.0;
  const double n = static_cast<double>(count);
  const double m = sum / n;
  const double var = std::max(0.0, (sum_sq - n * m * m) / (n - 1.0));
  return std::sqrt(var / n);
}

JackknifeSummary jackknife_mean(std::span<const double> values) {
  const auto n = static_cast<std::int64_t>(values.size());
  if (n == 0) fail(ErrorCode::kEmptyInput, "jackknife of an empty sample");
  const double total = pairwise_sum(values);
  const double mean = total / static_cast<double>(n);
  if (n == 1) return {mean, 0.0};
  // Leave-one-out means, then the usual (n-1)/n scaling of their spread.
  double spread = 0.0;
  for (double v : values) {
    const double loo = (total - v) / static_cast<double>(n - 1);
    spread += (loo - mean) * (loo - mean);
  }
  const double factor = static_cast<double>(n - 1) / static_cast<double>(n);
  return {mean, std::sqrt(factor * spread)};
}

}  // namespace matchvar
