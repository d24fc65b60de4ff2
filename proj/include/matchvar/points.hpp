#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "matchvar/error.hpp"

namespace matchvar {

/// Row-major block of `size()` points in R^dim.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(int dim) : dim_(dim) {
    if (dim < 1) fail(ErrorCode::kInvalidDimension, "point dimension must be >= 1");
  }
  PointSet(int dim, std::vector<double> coords) : PointSet(dim) {
    if (coords.size() % static_cast<std::size_t>(dim) != 0) {
      fail(ErrorCode::kInvalidArgument, "coordinate count is not a multiple of the dimension");
    }
    coords_ = std::move(coords);
  }

  [[nodiscard]] int dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t size() const noexcept {
    return dim_ > 0 ? coords_.size() / static_cast<std::size_t>(dim_) : 0;
  }
  [[nodiscard]] bool empty() const noexcept { return coords_.empty(); }

  [[nodiscard]] std::span<const double> operator[](std::size_t i) const noexcept {
    return {coords_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  [[nodiscard]] std::span<double> mutable_point(std::size_t i) noexcept {
    return {coords_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }

  void push_back(std::span<const double> p) { coords_.insert(coords_.end(), p.begin(), p.end()); }
  void resize(std::size_t n) { coords_.resize(n * static_cast<std::size_t>(dim_)); }
  void clear() noexcept { coords_.clear(); }
  void reserve(std::size_t n) { coords_.reserve(n * static_cast<std::size_t>(dim_)); }

  [[nodiscard]] std::span<const double> coords() const noexcept { return coords_; }
  [[nodiscard]] std::span<double> coords() noexcept { return coords_; }

 private:
  int dim_ = 0;
  std::vector<double> coords_;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return s;
}

}  // namespace matchvar
