#pragma once

// Run manifests: every command writes one next to its outputs, carrying the
// fully resolved configuration, seeds and input checksums. Replaying a
// manifest re-executes the command and must reproduce the outputs
// byte-identically (the manifest itself also records the wall-clock duration,
// which is informational and excluded from that guarantee).

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "zeronas/common.hpp"

namespace zeronas {

constexpr const char* kToolName = "zeronas";
constexpr const char* kToolVersion = "0.1.0";

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;  // original arguments, excluding the program name
  nlohmann::json config = nlohmann::json::object();  // fully resolved settings
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::string> inputs;  // path -> checksum
  std::vector<std::string> outputs;
  double duration_ms = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["command"] = command;
    j["argv"] = argv;
    j["config"] = config;
    j["seeds"] = seeds;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["duration_ms"] = duration_ms;
    return j;
  }

  static RunManifest from_json(const nlohmann::json& j) {
    RunManifest m;
    if (j.value("tool", "") != kToolName)
      throw Error("manifest was not written by " + std::string(kToolName));
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.config = j.value("config", nlohmann::json::object());
    if (j.contains("seeds")) m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("inputs")) m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    if (j.contains("outputs")) m.outputs = j.at("outputs").get<std::vector<std::string>>();
    m.duration_ms = j.value("duration_ms", 0.0);
    return m;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path);
    out << to_json().dump(2) << "\n";
  }

  static RunManifest load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw Error("manifest " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
  }
};

inline std::string checksum_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open input for checksum: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  return hex64(fnv1a64(bytes.data(), bytes.size()));
}

}  // namespace zeronas
