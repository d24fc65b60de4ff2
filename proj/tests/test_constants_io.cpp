#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "matchvar/constants_io.hpp"
#include "matchvar/error.hpp"

using namespace matchvar;
using namespace matchvar::constants;

namespace {

ConstantsTable sample_table() {
  ConstantsTable t;
  t.created = "2026-01-01T00:00:00Z";
  ConstantEstimate a;
  a.kind = Kind::kAlphaD;
  a.method = Method::kMonteCarlo;
  a.d = 2;
  a.value = 1.2801770913456789;
  a.error_bound = 1.4e-4;
  a.sample_size = 10'000'000;
  a.seed = 7;
  t.put(a);
  ConstantEstimate c;
  c.kind = Kind::kCijk;
  c.method = Method::kQuadrature;
  c.d = 3;
  c.i = 1;
  c.j = 0;
  c.k = 2;
  c.value = 0.1 + 0.2;  // not exactly representable
  c.error_bound = 3e-13;
  c.sample_size = 640;
  t.put(c);
  ConstantEstimate m;
  m.kind = Kind::kAlphaMd;
  m.method = Method::kClosedForm;
  m.d = 1;
  m.M = 5;
  m.value = 27.5;
  t.put(m);
  return t;
}

}  // namespace

TEST_CASE("constants cache round-trips bit-exactly") {
  const ConstantsTable t = sample_table();
  const ConstantsTable back = from_json_text(to_json_text(t));
  CHECK(back == t);
  CHECK(to_json_text(back) == to_json_text(t));
}

TEST_CASE("constants cache on disk") {
  const auto dir = std::filesystem::temp_directory_path() / "matchvar_io_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "c.json";
  store_constants(sample_table(), path);
  CHECK(load_constants(path) == sample_table());
  CHECK_FALSE(std::filesystem::exists(dir / "c.json.tmp"));
  try {
    load_constants(dir / "missing.json");
    FAIL("expected an I/O error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIo);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed caches are rejected") {
  for (const char* text : {"", "[]", "{\"schema_version\": 99, \"entries\": []}", "{not json",
                           "{\"schema_version\": 1, \"entries\": [{\"kind\": \"alpha_d\"}]}"}) {
    try {
      from_json_text(text);
      FAIL("expected a schema error for: " << text);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kSchemaMismatch);
    }
  }
}

TEST_CASE("shipped cache loads") {
  const auto path = default_cache_path();
  REQUIRE(std::filesystem::exists(path));
  const ConstantsTable t = load_constants(path);
  CHECK(t.find(Kind::kAlphaD, Method::kMonteCarlo, 2).has_value());
  CHECK(t.find(Kind::kAlphaMd, Method::kQuadrature, 3, 4).has_value());
  CHECK(alpha_Md(2, 2, t).value == doctest::Approx(4.5715).epsilon(1e-4));
}
