#include "matchvar/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <string_view>

#include <fmt/format.h>

#include "matchvar/error.hpp"

namespace matchvar {

std::size_t Dataset::n1() const noexcept {
  std::size_t c = 0;
  for (int v : w) c += v == 1;
  return c;
}

double Dataset::treated_fraction() const noexcept {
  return n() == 0 ? 0.0 : static_cast<double>(n1()) / static_cast<double>(n());
}

void Dataset::validate() const {
  if (x.dim() < 1) fail(ErrorCode::kInvalidDimension, "dataset needs at least one covariate");
  if (w.size() != y.size() || x.size() != y.size()) fail(ErrorCode::kInvalidArgument, "dataset columns differ in length");
  for (std::size_t i = 0; i < n(); ++i) {
    if (w[i] != 0 && w[i] != 1) fail(ErrorCode::kInvalidArgument, fmt::format("row {}: treatment must be 0 or 1", i));
    if (!std::isfinite(y[i])) fail(ErrorCode::kInvalidArgument, fmt::format("row {}: outcome is not finite", i));
  }
  for (double v : x.coords()) {
    if (!std::isfinite(v)) fail(ErrorCode::kInvalidArgument, "covariates must be finite");
  }
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) return out;
    start = comma + 1;
  }
}

double parse_number(std::string_view field, std::size_t line_no) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (field.empty() || ec != std::errc{} || ptr != last || !std::isfinite(v)) {
    fail(ErrorCode::kParse, fmt::format("line {}: '{}' is not a finite number", line_no, field));
  }
  return v;
}

}  // namespace

Dataset parse_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) fail(ErrorCode::kParse, "input is empty; expected header Y,W,X_1,...");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_fields(line);
  if (header.size() < 3 || header[0] != "Y" || header[1] != "W") {
    fail(ErrorCode::kParse, "header must start with Y,W followed by X_1,...,X_d");
  }
  const int d = static_cast<int>(header.size()) - 2;
  for (int c = 0; c < d; ++c) {
    if (header[static_cast<std::size_t>(c) + 2] != fmt::format("X_{}", c + 1)) {
      fail(ErrorCode::kParse, fmt::format("header column {} must be X_{}", c + 3, c + 1));
    }
  }
  Dataset data;
  data.x = PointSet(d);
  std::vector<double> row(static_cast<std::size_t>(d));
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      // Only trailing blank lines are tolerated.
      std::string rest;
      while (std::getline(in, rest)) {
        if (!rest.empty() && rest != "\r") fail(ErrorCode::kParse, fmt::format("line {}: empty row", line_no));
      }
      break;
    }
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      fail(ErrorCode::kParse,
           fmt::format("line {}: expected {} fields, found {}", line_no, header.size(), fields.size()));
    }
    data.y.push_back(parse_number(fields[0], line_no));
    const double wv = parse_number(fields[1], line_no);
    if (wv != 0.0 && wv != 1.0) fail(ErrorCode::kParse, fmt::format("line {}: W must be 0 or 1", line_no));
    data.w.push_back(static_cast<int>(wv));
    for (int c = 0; c < d; ++c) row[static_cast<std::size_t>(c)] = parse_number(fields[static_cast<std::size_t>(c) + 2], line_no);
    data.x.push_back(row);
  }
  if (data.n() == 0) fail(ErrorCode::kParse, "input has a header but no rows");
  return data;
}

Dataset read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, fmt::format("cannot open '{}'", path.string()));
  return parse_csv(in);
}

void write_csv(const Dataset& data, std::ostream& out) {
  out << "Y,W";
  for (int c = 0; c < data.d(); ++c) out << ",X_" << c + 1;
  out << '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    out << fmt::format("{},{}", data.y[i], data.w[i]);
    for (double v : data.x[i]) out << fmt::format(",{}", v);
    out << '\n';
  }
}

}  // namespace matchvar
