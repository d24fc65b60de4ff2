#include <doctest.h>

#include <numeric>
#include <vector>

#include "matchvar/kdtree.hpp"
#include "matchvar/rng.hpp"

using namespace matchvar;

namespace {

PointSet random_points(int d, std::size_t n, std::uint64_t seed, bool lattice = false) {
  RngStream rng(seed);
  PointSet p(d);
  std::vector<double> row(static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < n; ++i) {
    // Lattice coordinates force many exact ties.
    for (double& c : row) c = lattice ? static_cast<double>(static_cast<int>(rng.uniform() * 4)) : rng.uniform();
    p.push_back(row);
  }
  return p;
}

}  // namespace

TEST_CASE("kd-tree agrees with brute force, ties included") {
  for (int d : {1, 2, 3, 6}) {
    for (bool lattice : {false, true}) {
      const PointSet pts = random_points(d, 700, 10 + d, lattice);
      std::vector<std::size_t> subset;
      for (std::size_t i = 0; i < pts.size(); i += 2) subset.push_back(i);
      const KdTree full(pts);
      const KdTree half(pts, subset);
      std::vector<std::size_t> all(pts.size());
      std::iota(all.begin(), all.end(), 0);
      const PointSet queries = random_points(d, 60, 99 + d, lattice);
      for (std::size_t q = 0; q < queries.size(); ++q) {
        for (std::size_t k : {1u, 4u, 17u}) {
          CHECK(full.nearest(queries[q], k) == nearest_bruteforce(pts, all, queries[q], k));
          CHECK(half.nearest(queries[q], k) == nearest_bruteforce(pts, subset, queries[q], k));
        }
        // Self-exclusion.
        CHECK(full.nearest(pts[q], 3, q) == nearest_bruteforce(pts, all, pts[q], 3, q));
      }
    }
  }
}

TEST_CASE("ties go to the smaller index") {
  PointSet p(1, {1.0, -1.0, 1.0, 3.0});
  const KdTree tree(p);
  const auto nn = tree.nearest(std::vector<double>{0.0}, 2);
  REQUIRE(nn.size() == 2);
  CHECK(nn[0].index == 0);
  CHECK(nn[1].index == 1);
  CHECK(tree.nearest(std::vector<double>{0.0}, 10).size() == 4);
}
