#pragma once

#include <filesystem>
#include <string>

#include "matchvar/constants.hpp"

namespace matchvar::constants {

inline constexpr int kSchemaVersion = 1;

std::string to_json_text(const ConstantsTable& table);
ConstantsTable from_json_text(const std::string& text);

/// Writes atomically (temporary file, then rename).
void store_constants(const ConstantsTable& table, const std::filesystem::path& path);
ConstantsTable load_constants(const std::filesystem::path& path);

/// Location of the cache shipped with the source tree.
std::filesystem::path default_cache_path();

}  // namespace matchvar::constants
