#include "matchvar/constants_io.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "matchvar/error.hpp"

namespace matchvar::constants {

using nlohmann::json;

namespace {

json entry_to_json(const ConstantEstimate& e) {
  json j;
  j["kind"] = to_string(e.kind);
  j["d"] = e.d;
  if (e.kind == Kind::kAlphaMd) j["M"] = e.M;
  if (e.kind == Kind::kCijk) {
    j["i"] = e.i;
    j["j"] = e.j;
    j["k"] = e.k;
  }
  j["value"] = e.value;
  j["error_bound"] = e.error_bound;
  j["method"] = to_string(e.method);
  j[e.method == Method::kMonteCarlo ? "n_samples" : "grid_size"] = e.sample_size;
  j["seed"] = e.seed ? json(*e.seed) : json(nullptr);
  return j;
}

ConstantEstimate entry_from_json(const json& j) {
  ConstantEstimate e;
  e.kind = parse_kind(j.at("kind").get<std::string>());
  e.method = parse_method(j.at("method").get<std::string>());
  e.d = j.at("d").get<int>();
  if (e.kind == Kind::kAlphaMd) e.M = j.at("M").get<int>();
  if (e.kind == Kind::kCijk) {
    e.i = j.at("i").get<int>();
    e.j = j.at("j").get<int>();
    e.k = j.at("k").get<int>();
  }
  e.value = j.at("value").get<double>();
  e.error_bound = j.at("error_bound").get<double>();
  const char* size_key = e.method == Method::kMonteCarlo ? "n_samples" : "grid_size";
  e.sample_size = j.value(size_key, std::int64_t{0});
  if (j.contains("seed") && !j.at("seed").is_null()) e.seed = j.at("seed").get<std::uint64_t>();
  e.validate();
  return e;
}

}  // namespace

std::string to_json_text(const ConstantsTable& table) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["tool_version"] = table.tool_version;
  doc["created"] = table.created;
  json entries = json::array();
  for (const ConstantEstimate& e : table.entries()) entries.push_back(entry_to_json(e));
  doc["entries"] = std::move(entries);
  return doc.dump(1) + "\n";
}

ConstantsTable from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& ex) {
    fail(ErrorCode::kSchemaMismatch, fmt::format("constants cache is not a valid document: {}", ex.what()));
  }
  if (!doc.is_object() || !doc.contains("schema_version")) {
    fail(ErrorCode::kSchemaMismatch, "constants cache has no schema_version");
  }
  if (doc.at("schema_version") != kSchemaVersion) {
    fail(ErrorCode::kSchemaMismatch, fmt::format("constants cache schema_version {} is not {}",
                                                 doc.at("schema_version").dump(), kSchemaVersion));
  }
  ConstantsTable table;
  try {
    table.tool_version = doc.value("tool_version", std::string{});
    table.created = doc.value("created", std::string{});
    for (const json& j : doc.at("entries")) table.put(entry_from_json(j));
  } catch (const json::exception& ex) {
    fail(ErrorCode::kSchemaMismatch, fmt::format("malformed constants entry: {}", ex.what()));
  }
  return table;
}

void store_constants(const ConstantsTable& table, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, fmt::format("cannot write '{}'", tmp.string()));
    out << to_json_text(table);
    if (!out) fail(ErrorCode::kIo, fmt::format("write to '{}' failed", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::kIo, fmt::format("cannot move cache into '{}': {}", path.string(), ec.message()));
}

ConstantsTable load_constants(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, fmt::format("cannot read '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

std::filesystem::path default_cache_path() { return MATCHVAR_DEFAULT_CACHE; }

}  // namespace matchvar::constants
