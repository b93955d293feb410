#include "nasaswin/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace nasaswin {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v, const std::string& seps = ",") {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (seps.find(c) != std::string::npos) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size() || x < 0) throw std::invalid_argument(v);
    return static_cast<std::size_t>(x);
  } catch (const std::logic_error&) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::logic_error&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::array<std::size_t, kNumStages> to_stage_array(const std::string& key, const std::string& v) {
  auto parts = split_list(v);
  if (parts.size() != kNumStages) throw ConfigError("config key '" + key + "' needs 4 comma-separated values");
  std::array<std::size_t, kNumStages> out{};
  for (std::size_t i = 0; i < kNumStages; ++i) out[i] = to_size(key, parts[i]);
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ConfigError("train.lr must be non-negative");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("train.momentum must be in [0, 1)");
  if (batch < 1) throw ConfigError("train.batch must be at least 1");
  if (epochs < 1 && max_steps < 1) throw ConfigError("train.epochs or train.max_steps must be positive");
  if (cms_max_subset < 1 || cms_max_subset > 3) throw ConfigError("cms.max_subset must be in 1..3");
  if (!(clip_norm >= 0.0)) throw ConfigError("train.clip_norm must be non-negative");
}

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  bool dims_set = false;
  std::size_t embed_dim = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string v = trim(line.substr(eq + 1));
    auto& m = cfg.model;
    auto& t = cfg.train;
    if (key == "model.depths") {
      m.depths = to_stage_array(key, v);
    } else if (key == "model.dims") {
      m.dims = to_stage_array(key, v);
      dims_set = true;
    } else if (key == "model.heads") {
      m.heads = to_stage_array(key, v);
    } else if (key == "model.window") {
      m.window = to_size(key, v);
    } else if (key == "model.nasa_span") {
      if (v == "none" || v.empty()) {
        m.nasa_span.reset();
      } else {
        auto parts = split_list(v, ",-");
        if (parts.size() == 1) parts.push_back(parts[0]);
        if (parts.size() != 2) throw ConfigError("model.nasa_span expects 'a-b', 'a,b', a single stage or 'none'");
        m.nasa_span = std::make_pair(to_size(key, parts[0]), to_size(key, parts[1]));
      }
    } else if (key == "model.num_classes") {
      m.num_classes = to_size(key, v);
    } else if (key == "model.input_size") {
      auto parts = split_list(v, "x,");
      m.input_height = to_size(key, parts[0]);
      m.input_width = parts.size() > 1 ? to_size(key, parts[1]) : m.input_height;
    } else if (key == "model.head_mix") {
      if (v == "cross") {
        m.head_mix = HeadMix::CrossHead;
      } else if (v == "per_head") {
        m.head_mix = HeadMix::PerHead;
      } else {
        throw ConfigError("model.head_mix must be 'cross' or 'per_head'");
      }
    } else if (key == "model.mlp_ratio") {
      m.mlp_ratio = to_size(key, v);
    } else if (key == "cmfe.embed_dim") {
      embed_dim = to_size(key, v);
    } else if (key == "train.lr") {
      t.lr = to_double(key, v);
    } else if (key == "train.momentum") {
      t.momentum = to_double(key, v);
    } else if (key == "train.clip_norm") {
      t.clip_norm = to_double(key, v);
    } else if (key == "train.batch") {
      t.batch = to_size(key, v);
    } else if (key == "train.epochs") {
      t.epochs = to_size(key, v);
    } else if (key == "train.max_steps") {
      t.max_steps = to_size(key, v);
    } else if (key == "train.seed") {
      t.seed = to_size(key, v);
    } else if (key == "train.threads") {
      t.threads = to_size(key, v);
    } else if (key == "cms.enabled") {
      t.cms_enabled = to_bool(key, v);
    } else if (key == "cms.max_subset") {
      t.cms_max_subset = to_size(key, v);
    } else if (key == "data.denoiser") {
      cfg.denoiser = DenoiserSpec::parse(v);
    } else if (key == "eval.in_domain") {
      cfg.in_domain.clear();
      for (auto& s : split_list(v))
        if (!s.empty()) cfg.in_domain.push_back(s);
    } else {
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (embed_dim != 0) {
    if (dims_set && embed_dim != cfg.model.dims[0]) {
      throw ConfigError("cmfe.embed_dim disagrees with model.dims[0]");
    }
    for (std::size_t i = 0; i < kNumStages; ++i) cfg.model.dims[i] = embed_dim << i;
  }
  cfg.model.validate();
  cfg.train.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace nasaswin
