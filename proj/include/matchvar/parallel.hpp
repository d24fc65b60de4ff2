#pragma once

#include <cstdint>
#include <exception>
#include <mutex>
#include <span>
#include <vector>

namespace matchvar {

/// Selects the serial reference loop or the OpenMP kernel. Both visit the
/// same work units with the same random streams, so they produce identical
/// results; the serial path is kept for testing and benchmarking.
enum class Execution { kSerial, kParallel };

/// Caps OpenMP workers; `threads <= 0` restores the runtime default.
void set_thread_cap(int threads);
int max_threads();

template <typename Body>
void parallel_for(Execution exec, std::int64_t count, Body&& body) {
  if (exec == Execution::kSerial) {
    for (std::int64_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex error_mutex;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

/// Pairwise (cascade) summation in a fixed order.
double pairwise_sum(std::span<const double> values) noexcept;

struct MeanAccumulator {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::int64_t count = 0;

  void add(double v) noexcept {
    sum += v;
    sum_sq += v * v;
    ++count;
  }
  void merge(const MeanAccumulator& other) noexcept {
    sum += other.sum;
    sum_sq += other.sum_sq;
    count += other.count;
  }
  [[nodiscard]] double mean() const noexcept {
    return count > 0 ? sum / static_cast<double>(count) : 0.0;
  }
  /// Standard error of the mean (sample variance with n-1).
  [[nodiscard]] double standard_error() const noexcept;
};

/// Mean and delete-one jackknife standard error of `values`.
struct JackknifeSummary {
  double mean = 0.0;
  double standard_error = 0.0;
};
JackknifeSummary jackknife_mean(std::span<const double> values);

}  // namespace matchvar
