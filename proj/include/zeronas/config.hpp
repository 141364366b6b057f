#pragma once

// Structured config file: a JSON document with optional "macro" and "proxy"
// sections; omitted keys keep their defaults. The fully resolved settings are
// echoed into every run manifest.

#include <cstdlib>
#include <fstream>
#include <string>

#include <json.hpp>

#include "zeronas/common.hpp"
#include "zeronas/macro.hpp"
#include "zeronas/proxies.hpp"

namespace zeronas {

inline nlohmann::json macro_to_json(const MacroConfig& m) {
  nlohmann::json j;
  j["stem_channels"] = m.stem_channels;
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : m.stages) stages.push_back({{"cells", s.cells}, {"width", s.width}});
  j["stages"] = stages;
  j["reduction"] = std::string(reduction_policy_name(m.reduction));
  j["input_resolution"] = m.input_resolution;
  j["input_channels"] = m.input_channels;
  j["num_classes"] = m.num_classes;
  return j;
}

inline MacroConfig macro_from_json(const nlohmann::json& j) {
  MacroConfig m;
  m.stem_channels = j.value("stem_channels", m.stem_channels);
  if (j.contains("stages")) {
    m.stages.clear();
    for (const auto& s : j.at("stages"))
      m.stages.push_back({s.value("cells", 1), s.value("width", 16)});
  }
  if (j.contains("reduction"))
    m.reduction = reduction_policy_from_name(j.at("reduction").get<std::string>());
  m.input_resolution = j.value("input_resolution", m.input_resolution);
  m.input_channels = j.value("input_channels", m.input_channels);
  m.num_classes = j.value("num_classes", m.num_classes);
  return m;
}

inline nlohmann::json proxy_config_to_json(const ProxyConfig& c) {
  nlohmann::json j;
  j["batch"] = c.batch;
  j["input_file"] = c.input_file;
  j["zen_alpha"] = c.zen_alpha;
  j["zen_repeats"] = c.zen_repeats;
  j["zen_reinit"] = c.zen_reinit;
  j["ntk_batch"] = c.ntk_batch;
  j["ntk_seeds"] = c.ntk_seeds;
  j["epsilon"] = c.epsilon;
  j["hvp_epsilon"] = c.hvp_epsilon;
  j["loss_sign"] = c.loss_sign;
  j["region_scope"] =
      std::string(c.region_scope == ProxyConfig::RegionScope::cells ? "cells" : "all");
  return j;
}

inline ProxyConfig proxy_config_from_json(const nlohmann::json& j) {
  ProxyConfig c;
  c.batch = j.value("batch", c.batch);
  c.input_file = j.value("input_file", c.input_file);
  c.zen_alpha = j.value("zen_alpha", c.zen_alpha);
  c.zen_repeats = j.value("zen_repeats", c.zen_repeats);
  c.zen_reinit = j.value("zen_reinit", c.zen_reinit);
  c.ntk_batch = j.value("ntk_batch", c.ntk_batch);
  c.ntk_seeds = j.value("ntk_seeds", c.ntk_seeds);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.hvp_epsilon = j.value("hvp_epsilon", c.hvp_epsilon);
  c.loss_sign = j.value("loss_sign", c.loss_sign);
  if (j.contains("region_scope")) {
    const std::string s = j.at("region_scope").get<std::string>();
    if (s == "cells")
      c.region_scope = ProxyConfig::RegionScope::cells;
    else if (s == "all")
      c.region_scope = ProxyConfig::RegionScope::all;
    else
      throw Error("config: region_scope must be 'cells' or 'all', got '" + s + "'");
  }
  return c;
}

struct EngineConfig {
  MacroConfig macro;
  ProxyConfig proxy;

  nlohmann::json to_json() const {
    return {{"macro", macro_to_json(macro)}, {"proxy", proxy_config_to_json(proxy)}};
  }
};

// Path precedence: explicit flag, then the ZERONAS_CONFIG environment
// variable, then built-in defaults.
inline EngineConfig load_engine_config(const std::string& path) {
  EngineConfig cfg;
  std::string file = path;
  if (file.empty()) {
    if (const char* env = std::getenv("ZERONAS_CONFIG")) file = env;
  }
  if (file.empty()) return cfg;
  std::ifstream in(file);
  if (!in) throw Error("cannot open config file: " + file);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error("config file " + file + " is not valid JSON: " + e.what());
  }
  if (j.contains("macro")) cfg.macro = macro_from_json(j.at("macro"));
  if (j.contains("proxy")) cfg.proxy = proxy_config_from_json(j.at("proxy"));
  return cfg;
}

}  // namespace zeronas
