#pragma once

#include <compare>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "matchvar/points.hpp"

namespace matchvar {

/// Neighbors order by squared distance, then by index, which fixes the
/// tie-breaking rule: among equidistant points the smaller index wins.
struct Neighbor {
  double dist2 = 0.0;
  std::size_t index = 0;
  auto operator<=>(const Neighbor&) const = default;
};

inline constexpr std::size_t kNoExclusion = std::numeric_limits<std::size_t>::max();

/// Exact k-nearest-neighbor index over a subset of a point set. Indices in
/// results refer to rows of the original set. Immutable after construction
/// and safe to query from several threads.
class KdTree {
 public:
  KdTree(const PointSet& points, std::vector<std::size_t> subset);
  explicit KdTree(const PointSet& points);

  /// The k nearest points to `query` (fewer if the subset is smaller),
  /// ascending, skipping the row `exclude`.
  void nearest(std::span<const double> query, std::size_t k, std::size_t exclude,
               std::vector<Neighbor>& out) const;
  [[nodiscard]] std::vector<Neighbor> nearest(std::span<const double> query, std::size_t k,
                                              std::size_t exclude = kNoExclusion) const;

  [[nodiscard]] std::size_t size() const noexcept { return ids_.size(); }
  [[nodiscard]] int dim() const noexcept { return dim_; }

 private:
  struct Node {
    std::size_t begin;
    std::size_t end;
    int split_dim;  // -1 for leaves
    double split;
    std::size_t left;
    std::size_t right;
  };

  std::size_t build(std::size_t begin, std::size_t end);
  void search(std::size_t node, std::span<const double> query, std::size_t k, std::size_t exclude,
              std::vector<Neighbor>& heap) const;

  int dim_;
  std::vector<double> coords_;    // points in tree order, row-major
  std::vector<std::size_t> ids_;  // original row of each stored point
  std::vector<Node> nodes_;
};

/// Reference implementation: full scan with the same ordering.
std::vector<Neighbor> nearest_bruteforce(const PointSet& points, std::span<const std::size_t> subset,
                                         std::span<const double> query, std::size_t k,
                                         std::size_t exclude = kNoExclusion);

}  // namespace matchvar
