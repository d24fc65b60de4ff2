#include "matchvar/kdtree.hpp"

#include <algorithm>
#include <numeric>

#include "matchvar/error.hpp"

namespace matchvar {

namespace {
constexpr std::size_t kLeafSize = 12;

void push_bounded(std::vector<Neighbor>& heap, std::size_t k, Neighbor cand) {
  if (heap.size() < k) {
    heap.push_back(cand);
    std::push_heap(heap.begin(), heap.end());
  } else if (cand < heap.front()) {
    std::pop_heap(heap.begin(), heap.end());
    heap.back() = cand;
    std::push_heap(heap.begin(), heap.end());
  }
}
}  // namespace

KdTree::KdTree(const PointSet& points) : KdTree(points, [&] {
  std::vector<std::size_t> all(points.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return all;
}()) {}

KdTree::KdTree(const PointSet& points, std::vector<std::size_t> subset) : dim_(points.dim()), ids_(std::move(subset)) {
  if (dim_ < 1) fail(ErrorCode::kInvalidDimension, "kd-tree needs points of dimension >= 1");
  for (std::size_t id : ids_) {
    if (id >= points.size()) fail(ErrorCode::kInvalidArgument, "kd-tree subset index out of range");
  }
  // Build over a permutation of the subset, then lay coordinates out in tree order.
  coords_.resize(ids_.size() * static_cast<std::size_t>(dim_));
  for (std::size_t n = 0; n < ids_.size(); ++n) {
    const auto p = points[ids_[n]];
    std::copy(p.begin(), p.end(), coords_.begin() + static_cast<std::ptrdiff_t>(n * dim_));
  }
  if (!ids_.empty()) {
    nodes_.reserve(2 * ids_.size() / kLeafSize + 2);
    build(0, ids_.size());
  }
}

std::size_t KdTree::build(std::size_t begin, std::size_t end) {
  const std::size_t self = nodes_.size();
  nodes_.push_back({begin, end, -1, 0.0, 0, 0});
  if (end - begin <= kLeafSize) return self;

  const auto D = static_cast<std::size_t>(dim_);
  int best_dim = 0;
  double best_spread = -1.0;
  for (int c = 0; c < dim_; ++c) {
    double lo = coords_[begin * D + c];
    double hi = lo;
    for (std::size_t n = begin + 1; n < end; ++n) {
      lo = std::min(lo, coords_[n * D + c]);
      hi = std::max(hi, coords_[n * D + c]);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best_dim = c;
    }
  }
  if (best_spread <= 0.0) return self;  // all points coincide

  // Median split on an index permutation, then reorder rows.
  std::vector<std::size_t> perm(end - begin);
  std::iota(perm.begin(), perm.end(), begin);
  const std::size_t mid = perm.size() / 2;
  std::nth_element(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(mid), perm.end(),
                   [&](std::size_t a, std::size_t b) { return coords_[a * D + best_dim] < coords_[b * D + best_dim]; });
  std::vector<double> new_coords(perm.size() * D);
  std::vector<std::size_t> new_ids(perm.size());
  for (std::size_t n = 0; n < perm.size(); ++n) {
    std::copy_n(coords_.begin() + static_cast<std::ptrdiff_t>(perm[n] * D), D,
                new_coords.begin() + static_cast<std::ptrdiff_t>(n * D));
    new_ids[n] = ids_[perm[n]];
  }
  std::copy(new_coords.begin(), new_coords.end(), coords_.begin() + static_cast<std::ptrdiff_t>(begin * D));
  std::copy(new_ids.begin(), new_ids.end(), ids_.begin() + static_cast<std::ptrdiff_t>(begin));

  const std::size_t split_at = begin + mid;
  const double split = coords_[split_at * D + best_dim];
  const std::size_t left = build(begin, split_at);
  const std::size_t right = build(split_at, end);
  nodes_[self].split_dim = best_dim;
  nodes_[self].split = split;
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

void KdTree::search(std::size_t node_id, std::span<const double> query, std::size_t k, std::size_t exclude,
                    std::vector<Neighbor>& heap) const {
  const Node& node = nodes_[node_id];
  if (node.split_dim < 0) {
    const auto D = static_cast<std::size_t>(dim_);
    for (std::size_t n = node.begin; n < node.end; ++n) {
      if (ids_[n] == exclude) continue;
      const double d2 = squared_distance(query, std::span<const double>(coords_.data() + n * D, D));
      push_bounded(heap, k, {d2, ids_[n]});
    }
    return;
  }
  const double delta = query[static_cast<std::size_t>(node.split_dim)] - node.split;
  const std::size_t near = delta < 0.0 ? node.left : node.right;
  const std::size_t far = delta < 0.0 ? node.right : node.left;
  search(near, query, k, exclude, heap);
  // Visit the far side unless it is strictly farther than the current k-th
  // neighbor; equal distances must still be examined for the index tie rule.
  if (heap.size() < k || delta * delta <= heap.front().dist2) search(far, query, k, exclude, heap);
}

void KdTree::nearest(std::span<const double> query, std::size_t k, std::size_t exclude,
                     std::vector<Neighbor>& out) const {
  if (query.size() != static_cast<std::size_t>(dim_)) fail(ErrorCode::kInvalidArgument, "query dimension mismatch");
  out.clear();
  if (k == 0 || nodes_.empty()) return;
  out.reserve(k);
  search(0, query, k, exclude, out);
  std::sort_heap(out.begin(), out.end());
}

std::vector<Neighbor> KdTree::nearest(std::span<const double> query, std::size_t k, std::size_t exclude) const {
  std::vector<Neighbor> out;
  nearest(query, k, exclude, out);
  return out;
}

std::vector<Neighbor> nearest_bruteforce(const PointSet& points, std::span<const std::size_t> subset,
                                         std::span<const double> query, std::size_t k, std::size_t exclude) {
  std::vector<Neighbor> all;
  all.reserve(subset.size());
  for (std::size_t id : subset) {
    if (id == exclude) continue;
    all.push_back({squared_distance(query, points[id]), id});
  }
  const std::size_t take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end());
  all.resize(take);
  return all;
}

}  // namespace matchvar
