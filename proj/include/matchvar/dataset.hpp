#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "matchvar/points.hpp"

namespace matchvar {

/// Observed sample: outcome y, treatment w in {0, 1}, covariates x.
struct Dataset {
  std::vector<double> y;
  std::vector<int> w;
  PointSet x;

  [[nodiscard]] std::size_t n() const noexcept { return y.size(); }
  [[nodiscard]] int d() const noexcept { return x.dim(); }
  [[nodiscard]] std::size_t n1() const noexcept;
  [[nodiscard]] std::size_t n0() const noexcept { return n() - n1(); }
  [[nodiscard]] double treated_fraction() const noexcept;

  /// Shapes agree, w is binary and every value is finite.
  void validate() const;
};

/// Header must read exactly Y,W,X_1,...,X_d; every field is a finite number
/// and W is 0 or 1. Throws kParse with the offending line number.
Dataset parse_csv(std::istream& in);
Dataset read_csv(const std::filesystem::path& path);
void write_csv(const Dataset& data, std::ostream& out);

}  // namespace matchvar
