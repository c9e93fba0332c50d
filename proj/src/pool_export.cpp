#include "hgpsl/pool_export.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace hgpsl {

ExportFormat parse_export_format(const std::string& text) {
  if (text == "dot") return ExportFormat::Dot;
  if (text == "json") return ExportFormat::Json;
  throw ConfigError("unknown export format '" + text + "' (expected dot or json)");
}

std::string level_to_dot(const LevelOutput& level, int k) {
  std::ostringstream o;
  o << "digraph level" << k << " {\n";
  o << "  graph [level=" << k << ", nodes=" << level.node_ids.size() << "];\n";
  for (Index id : level.node_ids) o << "  n" << id << " [label=\"" << id << "\"];\n";
  char w[64];
  for (Index r = 0; r < level.structure.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(level.structure, r); it; ++it) {
      std::snprintf(w, sizeof w, "%.17g", it.value());
      o << "  n" << level.node_ids[static_cast<std::size_t>(r)] << " -> n"
        << level.node_ids[static_cast<std::size_t>(it.col())] << " [weight=\"" << w << "\"];\n";
    }
  }
  o << "}\n";
  return o.str();
}

std::string level_to_json(const LevelOutput& level, int k) {
  nlohmann::json j;
  j["level"] = k;
  j["input_nodes"] = level.input_nodes;
  j["nodes"] = level.node_ids;
  auto edges = nlohmann::json::array();
  for (Index r = 0; r < level.structure.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(level.structure, r); it; ++it) {
      edges.push_back({{"source", level.node_ids[static_cast<std::size_t>(r)]},
                       {"target", level.node_ids[static_cast<std::size_t>(it.col())]},
                       {"weight", it.value()}});
    }
  }
  j["edges"] = std::move(edges);
  return j.dump(2) + "\n";
}

std::vector<std::filesystem::path> write_level_exports(const std::vector<LevelOutput>& levels,
                                                       const std::filesystem::path& dir, const std::string& stem,
                                                       ExportFormat format) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const int k = static_cast<int>(i) + 1;
    const auto path =
        dir / (stem + "_level" + std::to_string(k) + (format == ExportFormat::Dot ? ".dot" : ".json"));
    std::ofstream out(path);
    out << (format == ExportFormat::Dot ? level_to_dot(levels[i], k) : level_to_json(levels[i], k));
    if (!out) throw std::runtime_error("cannot write " + path.string());
    paths.push_back(path);
  }
  return paths;
}

}  // namespace hgpsl
