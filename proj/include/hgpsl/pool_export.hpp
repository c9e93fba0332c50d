#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hgpsl/model.hpp"

namespace hgpsl {

enum class ExportFormat { Dot, Json };

ExportFormat parse_export_format(const std::string& text);

// Level k as a weighted digraph over original node ids.
std::string level_to_dot(const LevelOutput& level, int k);
std::string level_to_json(const LevelOutput& level, int k);

// Writes <dir>/<stem>_level<k>.<dot|json> for every level and returns the paths.
std::vector<std::filesystem::path> write_level_exports(const std::vector<LevelOutput>& levels,
                                                       const std::filesystem::path& dir, const std::string& stem,
                                                       ExportFormat format);

}  // namespace hgpsl
