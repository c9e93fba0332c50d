#include "hgpsl/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace hgpsl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

template <typename T>
T parse_as(const std::string& key, const std::string& value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "'");
  }
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& value) {
  std::vector<T> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_as<T>(key, trim(item)));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"dataset", [](RunConfig& c, const std::string&, const std::string& v) { c.dataset = v; }},
      {"data_dir", [](RunConfig& c, const std::string&, const std::string& v) {
         if (v.empty()) c.data_dir.reset(); else c.data_dir = v;
       }},
      {"cache_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.cache_dir = v; }},
      {"feature_scheme", [](RunConfig& c, const std::string&, const std::string& v) {
         if (v == "auto") c.feature_scheme.reset(); else c.feature_scheme = parse_feature_scheme(v);
       }},
      {"synth_count", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth_count = parse_as<Index>(k, v); }},
      {"synth_min_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth_min_size = parse_as<Index>(k, v); }},
      {"synth_max_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth_max_size = parse_as<Index>(k, v); }},
      {"synth_seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth_seed = parse_as<std::uint64_t>(k, v); }},
      {"num_levels", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.num_levels = parse_as<int>(k, v); }},
      {"hidden_dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.hidden_dim = parse_as<Index>(k, v); }},
      {"pooling_ratio", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.pooling_ratio = parse_as<double>(k, v); }},
      {"lambda", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.lambda = parse_as<double>(k, v); }},
      {"hop_limit", [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "unlimited") c.model.hop_limit.reset(); else c.model.hop_limit = parse_as<int>(k, v);
       }},
      {"variant", [](RunConfig& c, const std::string&, const std::string& v) { c.model.variant = parse_variant(v); }},
      {"mlp_dims", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.mlp_dims = parse_list<Index>(k, v); }},
      {"conv_activation", [](RunConfig& c, const std::string&, const std::string& v) { c.model.conv_activation = v; }},
      {"readout_activation", [](RunConfig& c, const std::string&, const std::string& v) { c.model.readout_activation = v; }},
      {"mlp_activation", [](RunConfig& c, const std::string&, const std::string& v) { c.model.mlp_activation = v; }},
      {"learning_rate", [](RunConfig& c, const std::string& k, const std::string& v) { c.optim.learning_rate = parse_as<double>(k, v); }},
      {"weight_decay", [](RunConfig& c, const std::string& k, const std::string& v) { c.optim.weight_decay = parse_as<double>(k, v); }},
      {"batch_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.optim.batch_size = parse_as<Index>(k, v); }},
      {"patience", [](RunConfig& c, const std::string& k, const std::string& v) { c.optim.patience = parse_as<int>(k, v); }},
      {"max_epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.optim.max_epochs = parse_as<int>(k, v); }},
      {"seeds", [](RunConfig& c, const std::string& k, const std::string& v) { c.seeds = parse_list<std::uint64_t>(k, v); }},
      {"output_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = v; }},
      {"gradcheck_nodes", [](RunConfig& c, const std::string& k, const std::string& v) { c.gradcheck_nodes = parse_as<Index>(k, v); }},
      {"gradcheck_features", [](RunConfig& c, const std::string& k, const std::string& v) { c.gradcheck_features = parse_as<Index>(k, v); }},
      {"gradcheck_seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.gradcheck_seed = parse_as<std::uint64_t>(k, v); }},
      {"gradcheck_eps", [](RunConfig& c, const std::string& k, const std::string& v) { c.gradcheck_eps = parse_as<double>(k, v); }},
      {"gradcheck_entries", [](RunConfig& c, const std::string& k, const std::string& v) { c.gradcheck_entries = parse_as<Index>(k, v); }},
      {"gradcheck_tolerance", [](RunConfig& c, const std::string& k, const std::string& v) { c.gradcheck_tolerance = parse_as<double>(k, v); }},
  };
  return table;
}

void validate(const RunConfig& c) {
  c.model.validate();
  if (c.optim.learning_rate < 0.0) throw ConfigError("learning_rate must be nonnegative");
  if (c.optim.weight_decay < 0.0) throw ConfigError("weight_decay must be nonnegative");
  if (c.optim.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (c.optim.patience < 0) throw ConfigError("patience must be nonnegative");
  if (c.optim.max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (c.gradcheck_nodes < 1 || c.gradcheck_features < 1) throw ConfigError("gradcheck graph dims must be positive");
  if (c.gradcheck_entries < 0) throw ConfigError("gradcheck_entries must be nonnegative");
  if (!(c.gradcheck_eps > 0.0)) throw ConfigError("gradcheck_eps must be positive");
  if (c.is_synthetic()) parse_synth_kind(c.dataset.substr(6));
}

}  // namespace

RunConfig default_run_config() {
  RunConfig c;
  c.cache_dir = default_cache_dir();
  return c;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(cfg, key, value);
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  apply_setting(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  validate(cfg);
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg = default_run_config();
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
    apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  validate(cfg);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse_run_config(ss.str());
  for (const auto& o : overrides) apply_override(cfg, o);
  return cfg;
}

std::string to_text(const RunConfig& c) {
  std::ostringstream o;
  o << "dataset = " << c.dataset << '\n';
  o << "data_dir = " << (c.data_dir ? c.data_dir->string() : "") << '\n';
  o << "cache_dir = " << c.cache_dir.string() << '\n';
  o << "feature_scheme = " << (c.feature_scheme ? to_string(*c.feature_scheme) : "auto") << '\n';
  o << "synth_count = " << c.synth_count << '\n';
  o << "synth_min_size = " << c.synth_min_size << '\n';
  o << "synth_max_size = " << c.synth_max_size << '\n';
  o << "synth_seed = " << c.synth_seed << '\n';
  o << "num_levels = " << c.model.num_levels << '\n';
  o << "hidden_dim = " << c.model.hidden_dim << '\n';
  o << "pooling_ratio = " << num(c.model.pooling_ratio) << '\n';
  o << "lambda = " << num(c.model.lambda) << '\n';
  o << "hop_limit = " << (c.model.hop_limit ? std::to_string(*c.model.hop_limit) : "unlimited") << '\n';
  o << "variant = " << to_string(c.model.variant) << '\n';
  o << "mlp_dims = " << join(c.model.mlp_dims) << '\n';
  o << "conv_activation = " << c.model.conv_activation << '\n';
  o << "readout_activation = " << c.model.readout_activation << '\n';
  o << "mlp_activation = " << c.model.mlp_activation << '\n';
  o << "learning_rate = " << num(c.optim.learning_rate) << '\n';
  o << "weight_decay = " << num(c.optim.weight_decay) << '\n';
  o << "batch_size = " << c.optim.batch_size << '\n';
  o << "patience = " << c.optim.patience << '\n';
  o << "max_epochs = " << c.optim.max_epochs << '\n';
  o << "seeds = " << join(c.seeds) << '\n';
  o << "output_dir = " << c.output_dir.string() << '\n';
  o << "gradcheck_nodes = " << c.gradcheck_nodes << '\n';
  o << "gradcheck_features = " << c.gradcheck_features << '\n';
  o << "gradcheck_seed = " << c.gradcheck_seed << '\n';
  o << "gradcheck_eps = " << num(c.gradcheck_eps) << '\n';
  o << "gradcheck_tolerance = " << num(c.gradcheck_tolerance) << '\n';
  o << "gradcheck_entries = " << c.gradcheck_entries << '\n';
  return o.str();
}

Dataset load_dataset(RunConfig& cfg) {
  if (cfg.dataset.empty()) throw ConfigError("config key 'dataset' is required");
  Dataset ds;
  if (cfg.is_synthetic()) {
    ds = synth_dataset(parse_synth_kind(cfg.dataset.substr(6)), cfg.synth_count, cfg.synth_min_size,
                       cfg.synth_max_size, cfg.synth_seed);
  } else {
    const auto dir = cfg.data_dir.value_or(cfg.cache_dir / cfg.dataset);
    ds = parse_tu_dataset(dir, cfg.feature_scheme);
  }
  cfg.model.num_classes = ds.num_classes;
  cfg.model.feature_dim = ds.feature_dim;
  return ds;
}

}  // namespace hgpsl
