#pragma once

// Benchmark-table ingestion and generation. JSONL is the canonical format
// (one record per line); CSV is provided for spreadsheet interchange. Unknown
// extra JSON fields are preserved on round-trip.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "zeronas/arch.hpp"
#include "zeronas/common.hpp"
#include "zeronas/network.hpp"
#include "zeronas/proxies.hpp"
#include "zeronas/rng.hpp"

namespace zeronas {

struct BenchmarkRecord {
  std::string arch;
  std::map<std::string, double> accuracy;  // dataset id -> percent in [0, 100]
  std::map<std::string, double> cost;      // device_metric -> value (>= 0)
  double params_m = 0.0;                   // millions of parameters
  double flops_m = 0.0;                    // millions of MACs
  nlohmann::json extra = nlohmann::json::object();  // unknown fields, kept verbatim
};

struct BenchmarkTable {
  std::vector<BenchmarkRecord> records;
  std::unordered_map<std::string, std::size_t> index;  // arch -> row
  std::string source;
  std::string checksum;

  const BenchmarkRecord* find(const std::string& arch) const {
    auto it = index.find(arch);
    return it == index.end() ? nullptr : &records[it->second];
  }

  std::vector<double> accuracy_column(const std::string& dataset) const {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) {
      auto it = r.accuracy.find(dataset);
      if (it == r.accuracy.end())
        throw Error("benchmark table has no accuracy for dataset '" + dataset +
                    "' at arch " + r.arch);
      out.push_back(it->second);
    }
    return out;
  }

  std::vector<std::string> datasets() const {
    std::map<std::string, int> seen;
    for (const auto& r : records)
      for (const auto& [k, v] : r.accuracy) seen[k]++;
    std::vector<std::string> out;
    for (const auto& [k, v] : seen) out.push_back(k);
    return out;
  }

  std::vector<std::string> cost_metrics() const {
    std::map<std::string, int> seen;
    for (const auto& r : records)
      for (const auto& [k, v] : r.cost) seen[k]++;
    std::vector<std::string> out;
    for (const auto& [k, v] : seen) out.push_back(k);
    return out;
  }
};

struct LoadOptions {
  bool lenient = false;       // skip malformed records instead of aborting
  bool opaque_archs = false;  // accept arch ids that are not cell strings
};

namespace detail {

inline bool valid_cost_key(const std::string& key) {
  auto ends_with = [&](std::string_view suffix) {
    return key.size() > suffix.size() &&
           key.compare(key.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  return ends_with("_latency_ms") || ends_with("_energy_mj");
}

inline BenchmarkRecord record_from_json(const nlohmann::json& j, bool opaque_archs) {
  if (!j.is_object()) throw Error("record is not a JSON object");
  BenchmarkRecord r;
  r.arch = j.at("arch").get<std::string>();
  if (!opaque_archs) parse_arch(r.arch);  // throws ParseError on bad cells
  if (j.contains("accuracy"))
    for (const auto& [k, v] : j.at("accuracy").items()) {
      const double a = v.get<double>();
      if (a < 0.0 || a > 100.0)
        throw Error("accuracy '" + k + "' = " + std::to_string(a) + " outside [0, 100]");
      r.accuracy[k] = a;
    }
  if (j.contains("cost"))
    for (const auto& [k, v] : j.at("cost").items()) {
      if (!valid_cost_key(k))
        throw Error("cost key '" + k +
                    "' has an unknown unit suffix (expected _latency_ms or _energy_mj)");
      const double c = v.get<double>();
      if (c < 0.0) throw Error("cost '" + k + "' = " + std::to_string(c) + " is negative");
      r.cost[k] = c;
    }
  if (j.contains("params_m")) r.params_m = j.at("params_m").get<double>();
  if (j.contains("flops_m")) r.flops_m = j.at("flops_m").get<double>();
  for (const auto& [k, v] : j.items())
    if (k != "arch" && k != "accuracy" && k != "cost" && k != "params_m" && k != "flops_m")
      r.extra[k] = v;
  return r;
}

inline nlohmann::json record_to_json(const BenchmarkRecord& r) {
  nlohmann::json j = r.extra;
  j["arch"] = r.arch;
  j["accuracy"] = r.accuracy;
  j["cost"] = r.cost;
  j["params_m"] = r.params_m;
  j["flops_m"] = r.flops_m;
  return j;
}

inline std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "";
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  return hex64(fnv1a64(bytes.data(), bytes.size()));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline BenchmarkTable table_from_records(std::vector<BenchmarkRecord> records,
                                         std::vector<std::size_t>* lines = nullptr) {
  BenchmarkTable t;
  t.records = std::move(records);
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    auto [it, inserted] = t.index.emplace(t.records[i].arch, i);
    if (!inserted) {
      const std::size_t a = lines ? (*lines)[it->second] : it->second + 1;
      const std::size_t b = lines ? (*lines)[i] : i + 1;
      throw Error("duplicate arch '" + t.records[i].arch + "' at lines " + std::to_string(a) +
                  " and " + std::to_string(b));
    }
  }
  return t;
}

// Loading is total: the result is either a valid table or an error report
// naming every offending line.
inline BenchmarkTable load_table_jsonl(const std::string& path, const LoadOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open benchmark file: " + path);
  std::vector<BenchmarkRecord> records;
  std::vector<std::size_t> lines;
  std::vector<std::string> problems;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(detail::record_from_json(nlohmann::json::parse(line), opts.opaque_archs));
      lines.push_back(line_no);
    } catch (const std::exception& e) {
      problems.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!problems.empty() && !opts.lenient) {
    std::string msg = path + ": " + std::to_string(problems.size()) + " malformed record(s):";
    for (const auto& p : problems) msg += "\n  " + p;
    throw Error(msg);
  }
  BenchmarkTable t = table_from_records(std::move(records), &lines);
  t.source = path;
  t.checksum = detail::file_checksum(path);
  return t;
}

inline void save_table_jsonl(const BenchmarkTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write benchmark file: " + path);
  for (const auto& r : table.records) out << detail::record_to_json(r).dump() << "\n";
}

// CSV interchange: columns arch, accuracy.<ds>..., cost.<metric>..., params_m,
// flops_m. Extra JSON fields are not representable in CSV.
inline void save_table_csv(const BenchmarkTable& table, const std::string& path) {
  const std::vector<std::string> datasets = table.datasets();
  const std::vector<std::string> metrics = table.cost_metrics();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write benchmark file: " + path);
  out << "arch";
  for (const auto& d : datasets) out << ",accuracy." << d;
  for (const auto& m : metrics) out << ",cost." << m;
  out << ",params_m,flops_m\n";
  out.precision(17);
  for (const auto& r : table.records) {
    out << r.arch;
    for (const auto& d : datasets) {
      out << ",";
      auto it = r.accuracy.find(d);
      if (it != r.accuracy.end()) out << it->second;
    }
    for (const auto& m : metrics) {
      out << ",";
      auto it = r.cost.find(m);
      if (it != r.cost.end()) out << it->second;
    }
    out << "," << r.params_m << "," << r.flops_m << "\n";
  }
}

inline BenchmarkTable load_table_csv(const std::string& path, const LoadOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open benchmark file: " + path);
  std::string header;
  if (!std::getline(in, header)) throw Error(path + ": empty CSV file");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const std::vector<std::string> cols = detail::split_csv_line(header);
  if (cols.empty() || cols[0] != "arch")
    throw Error(path + ": first CSV column must be 'arch'");
  std::vector<BenchmarkRecord> records;
  std::vector<std::size_t> lines;
  std::vector<std::string> problems;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      const std::vector<std::string> cells = detail::split_csv_line(line);
      if (cells.size() != cols.size())
        throw Error("expected " + std::to_string(cols.size()) + " cells, got " +
                    std::to_string(cells.size()));
      nlohmann::json j;
      j["arch"] = cells[0];
      for (std::size_t c = 1; c < cols.size(); ++c) {
        if (cells[c].empty()) continue;
        const double v = std::stod(cells[c]);
        if (cols[c].rfind("accuracy.", 0) == 0)
          j["accuracy"][cols[c].substr(9)] = v;
        else if (cols[c].rfind("cost.", 0) == 0)
          j["cost"][cols[c].substr(5)] = v;
        else if (cols[c] == "params_m")
          j["params_m"] = v;
        else if (cols[c] == "flops_m")
          j["flops_m"] = v;
        else
          throw Error("unknown CSV column '" + cols[c] + "'");
      }
      records.push_back(detail::record_from_json(j, opts.opaque_archs));
      lines.push_back(line_no);
    } catch (const std::exception& e) {
      problems.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!problems.empty() && !opts.lenient) {
    std::string msg = path + ": " + std::to_string(problems.size()) + " malformed record(s):";
    for (const auto& p : problems) msg += "\n  " + p;
    throw Error(msg);
  }
  BenchmarkTable t = table_from_records(std::move(records), &lines);
  t.source = path;
  t.checksum = detail::file_checksum(path);
  return t;
}

inline BenchmarkTable load_table(const std::string& path, const LoadOptions& opts = {}) {
  if (path.size() > 4 && path.compare(path.size() - 4, 4, ".csv") == 0)
    return load_table_csv(path, opts);
  return load_table_jsonl(path, opts);
}

// Self-contained synthetic benchmark: accuracy is a calibrated monotone map
// of #Params plus seeded Gaussian noise, hardware costs are affine in #FLOPs
// with seeded jitter. Pure function of (n, seed, noise).
constexpr double kFixtureDefaultNoise = 1.0;

inline BenchmarkTable generate_fixture(int n, std::uint64_t seed,
                                       double noise = kFixtureDefaultNoise,
                                       const MacroConfig& macro = {}) {
  if (n < 1) throw Error("generate_fixture: n must be >= 1");
  if (static_cast<std::int64_t>(n) > kSpaceSize)
    throw Error("generate_fixture: n = " + std::to_string(n) + " exceeds the space size " +
                std::to_string(kSpaceSize));
  if (noise < 0.0) throw Error("generate_fixture: noise must be >= 0");
  macro.validate();

  RngState rng(seed);
  RngState pick = rng.derive("pick");
  std::vector<std::int64_t> order(static_cast<std::size_t>(kSpaceSize));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int64_t>(i);
  for (std::size_t i = order.size() - 1; i > 0; --i)
    std::swap(order[i], order[pick.next_below(i + 1)]);
  order.resize(static_cast<std::size_t>(n));
  std::sort(order.begin(), order.end());

  // Calibration bounds from the structural extremes of the space.
  CellSpec all_none;
  CellSpec all_conv3;
  all_conv3.ops.fill(OpKind::conv_3x3);
  const double log_min = std::log(static_cast<double>(count_params(all_none, macro)));
  const double log_max = std::log(static_cast<double>(count_params(all_conv3, macro)));
  const double max_flops = static_cast<double>(count_flops(all_conv3, macro));

  RngState acc_rng = rng.derive("accuracy");
  RngState cost_rng = rng.derive("cost");
  std::vector<BenchmarkRecord> records;
  records.reserve(static_cast<std::size_t>(n));
  for (std::int64_t idx : order) {
    const CellSpec spec = spec_at(idx);
    const std::int64_t params = count_params(spec, macro);
    const std::int64_t flops = count_flops(spec, macro);
    BenchmarkRecord r;
    r.arch = serialize_arch(spec);
    const double t = (std::log(static_cast<double>(params)) - log_min) / (log_max - log_min);
    double acc = 10.0 + 80.0 * t + noise * acc_rng.normal();
    acc = std::clamp(acc, 1.0, 99.0);
    r.accuracy["synthetic"] = acc;
    const double f = static_cast<double>(flops) / max_flops;
    const double lat = (1.0 + 10.0 * f) * (1.0 + 0.05 * noise * cost_rng.normal());
    const double energy = (2.0 + 28.0 * f) * (1.0 + 0.05 * noise * cost_rng.normal());
    r.cost["gtx1080_latency_ms"] = std::max(lat, 0.01);
    r.cost["edgegpu_energy_mj"] = std::max(energy, 0.01);
    r.params_m = static_cast<double>(params) / 1e6;
    r.flops_m = static_cast<double>(flops) / 1e6;
    records.push_back(std::move(r));
  }
  BenchmarkTable t = table_from_records(std::move(records));
  t.source = "fixture(n=" + std::to_string(n) + ",seed=" + std::to_string(seed) +
             ",noise=" + std::to_string(noise) + ")";
  return t;
}

// --- proxy score files ------------------------------------------------------

inline nlohmann::json score_to_json(const ProxyScore& s) {
  nlohmann::json j;
  j["arch"] = s.arch;
  j["arch_index"] = s.arch_index;
  j["proxy"] = s.proxy;
  if (s.outcome == Outcome::ok)
    j["value"] = s.value;
  else
    j["value"] = std::string(outcome_name(s.outcome));
  j["outcome"] = std::string(outcome_name(s.outcome));
  j["seed"] = s.seed;
  j["fingerprint"] = s.fingerprint;
  if (!s.diagnostics.empty()) j["diagnostics"] = s.diagnostics;
  if (!s.error.empty()) j["error"] = s.error;
  return j;
}

inline ProxyScore score_from_json(const nlohmann::json& j) {
  ProxyScore s;
  s.arch = j.at("arch").get<std::string>();
  s.arch_index = j.value("arch_index", -1);
  s.proxy = j.at("proxy").get<std::string>();
  const std::string outcome = j.value("outcome", "ok");
  if (outcome == "ok")
    s.outcome = Outcome::ok;
  else if (outcome == "ill_conditioned")
    s.outcome = Outcome::ill_conditioned;
  else if (outcome == "singular")
    s.outcome = Outcome::singular;
  else if (outcome == "error")
    s.outcome = Outcome::error;
  else
    throw Error("unknown outcome '" + outcome + "'");
  if (s.outcome == Outcome::ok) s.value = j.at("value").get<double>();
  s.seed = j.value("seed", 0ull);
  s.fingerprint = j.value("fingerprint", "");
  if (j.contains("diagnostics")) s.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
  s.error = j.value("error", "");
  return s;
}

inline std::vector<ProxyScore> load_scores_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open score file: " + path);
  std::vector<ProxyScore> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(score_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

struct JoinedScores {
  std::vector<std::size_t> rows;  // table rows with a score, ascending
  std::vector<double> values;     // aligned with rows
  std::vector<bool> sentinel;
  std::vector<std::string> unmatched;  // score archs absent from the table
};

// Inner join of score records onto table rows by arch string.
inline JoinedScores attach_scores(const BenchmarkTable& table,
                                  const std::vector<ProxyScore>& scores) {
  std::unordered_map<std::string, const ProxyScore*> by_arch;
  JoinedScores out;
  for (const auto& s : scores) {
    if (!table.index.count(s.arch)) {
      out.unmatched.push_back(s.arch);
      continue;
    }
    by_arch[s.arch] = &s;
  }
  for (std::size_t row = 0; row < table.records.size(); ++row) {
    auto it = by_arch.find(table.records[row].arch);
    if (it == by_arch.end()) continue;
    out.rows.push_back(row);
    out.values.push_back(it->second->ok() ? it->second->value : 0.0);
    out.sentinel.push_back(!it->second->ok());
  }
  if (out.rows.empty()) throw Error("attach_scores: no score arch matches the table");
  return out;
}

}  // namespace zeronas
