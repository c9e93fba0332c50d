#include "hgpsl/graph_data.hpp"
#include "hgpsl/zip_archive.hpp"

#include <cstdlib>
#include <regex>

// After Eigen: <resolv.h> defines a `_res` macro that collides with Eigen
// parameter names.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace hgpsl {

namespace fs = std::filesystem;

const std::vector<std::string>& known_datasets() {
  static const std::vector<std::string> names = {"ENZYMES", "PROTEINS", "DD", "NCI1", "NCI109", "Mutagenicity",
                                                 "PROTEINS_full", "MUTAG", "COLLAB", "IMDB-BINARY"};
  return names;
}

std::string default_base_url() { return "https://www.chrsmrrs.com/graphkerneldatasets"; }

fs::path default_cache_dir() {
  if (const char* env = std::getenv("HGPSL_CACHE"); env && *env) return env;
  if (const char* home = std::getenv("HOME"); home && *home) return fs::path(home) / ".cache" / "hgpsl";
  return fs::temp_directory_path() / "hgpsl-cache";
}

bool has_tu_manifest(const fs::path& dir, const std::string& name) {
  for (const char* suffix : {"_A.txt", "_graph_indicator.txt", "_graph_labels.txt"}) {
    if (!fs::exists(dir / (name + suffix))) return false;
  }
  return true;
}

FetchResult fetch_dataset(const std::string& name, const std::string& base_url, const fs::path& cache_dir) {
  const auto& names = known_datasets();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw LookupError("unknown dataset '" + name + "'");
  }
  const fs::path target = cache_dir / name;
  if (has_tu_manifest(target, name)) return {target, true};

  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(base_url, m, url_re)) throw ConfigError("malformed base url '" + base_url + "'");
  std::string path = m[2].matched ? m[2].str() : std::string();
  if (!path.empty() && path.back() == '/') path.pop_back();
  path += "/" + name + ".zip";

  httplib::Client client(m[1].str());
  client.set_follow_location(true);
  client.set_connection_timeout(30);
  client.set_read_timeout(300);
  auto res = client.Get(path);
  if (!res) throw TransportError("GET " + m[1].str() + path + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw TransportError("GET " + m[1].str() + path + " returned HTTP " + std::to_string(res->status));

  const std::vector<std::uint8_t> bytes(res->body.begin(), res->body.end());
  fs::create_directories(cache_dir);
  extract_zip(bytes, cache_dir);
  if (!has_tu_manifest(target, name)) {
    throw FormatError("archive for " + name + " lacks the mandatory TU files under " + target.string());
  }
  return {target, false};
}

}  // namespace hgpsl
