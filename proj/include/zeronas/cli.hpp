#pragma once

// Command-line surface. Exit codes: 0 success, 2 usage/config error,
// 3 numeric sentinel present in the primary output, 4 I/O error.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "zeronas/benchio.hpp"
#include "zeronas/config.hpp"
#include "zeronas/manifest.hpp"
#include "zeronas/metrics.hpp"
#include "zeronas/proxies.hpp"
#include "zeronas/search.hpp"
#include "zeronas/svg.hpp"

namespace zeronas::cli {

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kSentinel = 3;
constexpr int kIo = 4;

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw Error("malformed " + what + " list entry '" + item + "'");
    }
  }
  if (out.empty()) throw Error("empty " + what + " list");
  return out;
}

inline std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(s)) {
    try {
      out.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw Error("malformed seed list entry '" + item + "'");
    }
  }
  return out;
}

inline std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// score

inline int cmd_score(const std::string& arch, const std::string& proxy_id,
                     const std::string& config_path, std::uint64_t seed,
                     const std::string& out_path,
                     const std::vector<std::string>& original_args) {
  detail::Timer timer;
  if (!find_proxy(proxy_id)) throw Error("unknown proxy '" + proxy_id + "'");
  EngineConfig cfg = load_engine_config(config_path);
  cfg.proxy.init_seed = seed;
  const CellSpec spec = parse_arch(arch);
  const ProxyScore score = evaluate_proxy(spec, cfg.macro, cfg.proxy, proxy_id);

  if (score.ok())
    std::cout << detail::format_value(score.value) << "\n";
  else if (score.outcome == Outcome::error)
    std::cout << "error: " << score.error << "\n";
  else
    std::cout << outcome_name(score.outcome) << "\n";

  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write score record: " + out_path);
    out << score_to_json(score).dump() << "\n";

    RunManifest manifest;
    manifest.command = "score";
    manifest.argv = original_args;
    manifest.config = load_engine_config(config_path).to_json();
    manifest.config["arch"] = arch;
    manifest.config["proxy"] = proxy_id;
    manifest.seeds = {seed};
    if (!config_path.empty()) manifest.inputs[config_path] = checksum_file(config_path);
    manifest.outputs = {out_path};
    manifest.duration_ms = timer.ms();
    manifest.save(out_path + ".manifest.json");
  }
  return score.ok() ? kOk : kSentinel;
}

// ---------------------------------------------------------------------------
// rank

struct RankOptions {
  std::vector<std::string> proxies;
  std::string out_dir;
  std::string bench_path;  // archs come from this table when set
  std::string space = "nb201-like";
  std::string config_path;
  std::vector<std::uint64_t> seeds = {0};
  std::int64_t limit = 0;  // 0 = no limit
  int jobs = 1;
};

inline int cmd_rank(const RankOptions& opt, const std::vector<std::string>& original_args) {
  detail::Timer timer;
  if (opt.proxies.empty()) throw Error("rank: at least one proxy required (--proxies)");
  for (const auto& p : opt.proxies)
    if (!find_proxy(p)) throw Error("unknown proxy '" + p + "'");
  if (opt.space != "nb201-like")
    throw Error("rank: unknown space '" + opt.space + "' (supported: nb201-like)");
  if (opt.seeds.empty()) throw Error("rank: at least one seed required");
  if (opt.jobs < 1) throw Error("rank: --jobs must be >= 1");
  EngineConfig cfg = load_engine_config(opt.config_path);

  std::filesystem::create_directories(opt.out_dir);

  // Architecture list: either every arch in a benchmark table, or the full
  // enumerated space.
  std::vector<CellSpec> specs;
  if (!opt.bench_path.empty()) {
    const BenchmarkTable table = load_table(opt.bench_path);
    specs.reserve(table.records.size());
    for (const auto& r : table.records) specs.push_back(parse_arch(r.arch));
  } else {
    specs = enumerate_space();
  }
  if (opt.limit > 0 && static_cast<std::int64_t>(specs.size()) > opt.limit)
    specs.resize(static_cast<std::size_t>(opt.limit));

  // One output file per (proxy, seed). Completed archs in existing files are
  // skipped, which makes interrupted runs resumable.
  struct OutFile {
    std::string proxy;
    std::uint64_t seed;
    std::string path;
    std::set<std::string> done;
  };
  std::vector<OutFile> files;
  for (const auto& proxy : opt.proxies)
    for (std::uint64_t seed : opt.seeds) {
      OutFile f;
      f.proxy = proxy;
      f.seed = seed;
      f.path = (std::filesystem::path(opt.out_dir) /
                (proxy + ".seed" + std::to_string(seed) + ".jsonl"))
                   .string();
      if (std::filesystem::exists(f.path))
        for (const auto& s : load_scores_jsonl(f.path)) f.done.insert(s.arch);
      files.push_back(std::move(f));
    }

  // Work units are architectures; per arch we evaluate whatever (proxy, seed)
  // pairs are still missing. Results are written by the main thread in arch
  // order so output bytes do not depend on --jobs.
  struct Slot {
    bool ready = false;
    bool any_sentinel = false;
    std::vector<std::pair<std::size_t, std::string>> lines;  // (file idx, json line)
  };
  std::vector<Slot> slots(specs.size());
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string failure;

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= specs.size() || failed.load()) return;
      Slot slot;
      try {
        const std::string arch = serialize_arch(specs[i]);
        // Group missing files by seed so evaluate_all shares passes.
        for (std::uint64_t seed : opt.seeds) {
          std::vector<std::string> missing;
          std::vector<std::size_t> file_idx;
          for (std::size_t f = 0; f < files.size(); ++f)
            if (files[f].seed == seed && !files[f].done.count(arch)) {
              missing.push_back(files[f].proxy);
              file_idx.push_back(f);
            }
          if (missing.empty()) continue;
          ProxyConfig pc = cfg.proxy;
          pc.init_seed = seed;
          const std::vector<ProxyScore> scores =
              evaluate_all(specs[i], cfg.macro, pc, missing);
          for (std::size_t k = 0; k < scores.size(); ++k) {
            slot.lines.emplace_back(file_idx[k], score_to_json(scores[k]).dump());
            if (!scores[k].ok()) slot.any_sentinel = true;
          }
        }
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mu);
        failed.store(true);
        if (failure.empty()) failure = e.what();
        cv.notify_all();
        return;
      }
      {
        std::lock_guard<std::mutex> lock(mu);
        slots[i] = std::move(slot);
        slots[i].ready = true;
      }
      cv.notify_all();
    }
  };

  std::vector<std::thread> pool;
  const int jobs = std::min<int>(opt.jobs, static_cast<int>(specs.size()) + 1);
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);

  std::vector<std::ofstream> streams;
  streams.reserve(files.size());
  for (const auto& f : files) {
    streams.emplace_back(f.path, std::ios::app);
    if (!streams.back()) {
      failed.store(true);
      failure = "cannot write score file: " + files[streams.size() - 1].path;
      break;
    }
  }

  bool any_sentinel = false;
  if (!failed.load()) {
    for (std::size_t i = 0; i < specs.size(); ++i) {
      std::unique_lock<std::mutex> lock(mu);
      cv.wait(lock, [&] { return slots[i].ready || failed.load(); });
      if (failed.load()) break;
      Slot slot = std::move(slots[i]);
      lock.unlock();
      for (const auto& [fidx, line] : slot.lines) streams[fidx] << line << "\n";
      for (auto& s : streams) s.flush();
      any_sentinel = any_sentinel || slot.any_sentinel;
      if ((i + 1) % 16 == 0 || i + 1 == specs.size())
        std::cerr << "rank: " << (i + 1) << "/" << specs.size() << " architectures\n";
    }
  }
  for (auto& t : pool) t.join();
  if (failed.load()) throw Error("rank failed: " + failure);

  RunManifest manifest;
  manifest.command = "rank";
  manifest.argv = original_args;
  manifest.config = cfg.to_json();
  manifest.config["proxies"] = opt.proxies;
  manifest.config["space"] = opt.space;
  manifest.config["limit"] = opt.limit;
  manifest.seeds = opt.seeds;
  if (!opt.bench_path.empty()) manifest.inputs[opt.bench_path] = checksum_file(opt.bench_path);
  if (!opt.config_path.empty())
    manifest.inputs[opt.config_path] = checksum_file(opt.config_path);
  for (const auto& f : files) manifest.outputs.push_back(f.path);
  manifest.duration_ms = timer.ms();
  manifest.save((std::filesystem::path(opt.out_dir) / "rank.manifest.json").string());

  return any_sentinel ? kSentinel : kOk;
}

// ---------------------------------------------------------------------------
// correlate

struct CorrelateOptions {
  std::string bench_path;
  std::string scores_path;  // directory of score files, or one file
  std::string out_dir;
  double top_percent = 5.0;
  std::string dataset;  // empty = every dataset in the table
};

inline int cmd_correlate(const CorrelateOptions& opt,
                         const std::vector<std::string>& original_args) {
  detail::Timer timer;
  const BenchmarkTable table = load_table(opt.bench_path);

  std::vector<std::string> score_files;
  if (std::filesystem::is_directory(opt.scores_path)) {
    for (const auto& entry : std::filesystem::directory_iterator(opt.scores_path))
      if (entry.path().extension() == ".jsonl") score_files.push_back(entry.path().string());
    std::sort(score_files.begin(), score_files.end());
  } else {
    score_files.push_back(opt.scores_path);
  }
  if (score_files.empty())
    throw IoError("no score files (*.jsonl) found under " + opt.scores_path);

  // proxy id -> seed -> aligned (value, sentinel) per covered table row.
  struct SeedJoin {
    std::uint64_t seed;
    JoinedScores join;
  };
  std::map<std::string, std::vector<SeedJoin>> by_proxy;
  for (const auto& path : score_files) {
    const std::vector<ProxyScore> scores = load_scores_jsonl(path);
    if (scores.empty()) continue;
    const std::string proxy = scores.front().proxy;
    for (const auto& s : scores)
      if (s.proxy != proxy)
        throw Error(path + ": mixed proxy ids in one score file");
    by_proxy[proxy].push_back({scores.front().seed, attach_scores(table, scores)});
  }
  if (by_proxy.empty()) throw Error("no usable score records found");

  std::vector<std::string> datasets =
      opt.dataset.empty() ? table.datasets() : std::vector<std::string>{opt.dataset};
  if (datasets.empty()) throw Error("benchmark table has no accuracy columns");

  std::vector<SubsetSpec> subsets = {{100.0}};
  if (opt.top_percent < 100.0) subsets.push_back({opt.top_percent});

  std::vector<CorrelationReport> reports;
  for (const auto& [proxy, seed_joins] : by_proxy) {
    const ProxyInfo* info = find_proxy(proxy);
    const bool higher = info ? info->higher_is_better : true;
    // Rows covered by every seed of this proxy.
    std::map<std::size_t, int> row_hits;
    for (const auto& sj : seed_joins)
      for (std::size_t r : sj.join.rows) row_hits[r]++;
    std::vector<std::size_t> rows;
    for (const auto& [r, hits] : row_hits)
      if (hits == static_cast<int>(seed_joins.size())) rows.push_back(r);
    if (rows.size() < 2) {
      CorrelationReport rep;
      rep.proxy = proxy;
      rep.dataset = datasets.front();
      rep.subset = "all";
      rep.valid = false;
      rep.warning = "fewer than 2 architectures covered by all seeds";
      reports.push_back(rep);
      continue;
    }
    std::vector<SeedScores> seeds;
    for (const auto& sj : seed_joins) {
      SeedScores ss;
      ss.seed = sj.seed;
      std::map<std::size_t, std::size_t> row_to_pos;
      for (std::size_t k = 0; k < sj.join.rows.size(); ++k) row_to_pos[sj.join.rows[k]] = k;
      for (std::size_t r : rows) {
        const std::size_t k = row_to_pos.at(r);
        ss.values.push_back(sj.join.values[k]);
        ss.is_sentinel.push_back(sj.join.sentinel[k]);
      }
      seeds.push_back(std::move(ss));
    }
    for (const auto& dataset : datasets) {
      std::vector<double> accuracy;
      accuracy.reserve(rows.size());
      for (std::size_t r : rows) {
        auto it = table.records[r].accuracy.find(dataset);
        if (it == table.records[r].accuracy.end())
          throw Error("table row " + table.records[r].arch + " lacks dataset '" + dataset + "'");
        accuracy.push_back(it->second);
      }
      auto reps = correlate_proxy(proxy, higher, dataset, accuracy, seeds, subsets);
      reports.insert(reports.end(), reps.begin(), reps.end());
    }
  }

  std::filesystem::create_directories(opt.out_dir);
  const std::string json_path =
      (std::filesystem::path(opt.out_dir) / "correlation.json").string();
  const std::string csv_path = (std::filesystem::path(opt.out_dir) / "correlation.csv").string();

  nlohmann::json out;
  out["metadata"] = {
      {"bench", opt.bench_path},
      {"seed_averaging", "correlations are computed per seed and then averaged"},
      {"sentinel_handling", "sentinel outcomes ranked strictly worse than all numeric scores"},
      {"top_percent", opt.top_percent}};
  out["reports"] = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json jr;
    jr["proxy"] = r.proxy;
    jr["dataset"] = r.dataset;
    jr["subset"] = r.subset;
    jr["valid"] = r.valid;
    if (r.valid) {
      jr["spr"] = r.spearman;
      jr["kt"] = r.kendall;
    }
    jr["n"] = r.sample_count;
    jr["seeds"] = r.seed_count;
    jr["sentinels"] = r.sentinel_count;
    if (!r.warning.empty()) jr["warning"] = r.warning;
    out["reports"].push_back(jr);
  }
  {
    std::ofstream f(json_path);
    if (!f) throw IoError("cannot write " + json_path);
    f << out.dump(2) << "\n";
  }
  {
    std::ofstream f(csv_path);
    if (!f) throw IoError("cannot write " + csv_path);
    f << "proxy,dataset,subset,spr,kt,n\n";
    for (const auto& r : reports) {
      if (!r.valid) continue;
      f << r.proxy << "," << r.dataset << "," << r.subset << ","
        << detail::format_value(r.spearman) << "," << detail::format_value(r.kendall) << ","
        << r.sample_count << "\n";
    }
  }

  RunManifest manifest;
  manifest.command = "correlate";
  manifest.argv = original_args;
  manifest.config = {{"top_percent", opt.top_percent}, {"dataset", opt.dataset}};
  manifest.inputs[opt.bench_path] = checksum_file(opt.bench_path);
  for (const auto& f : score_files) manifest.inputs[f] = checksum_file(f);
  manifest.outputs = {json_path, csv_path};
  manifest.duration_ms = timer.ms();
  manifest.save((std::filesystem::path(opt.out_dir) / "correlate.manifest.json").string());
  return kOk;
}

// ---------------------------------------------------------------------------
// pareto

struct ParetoOptions {
  std::string bench_path;
  std::string scores_path;  // one proxy's score file
  std::string metric;
  std::string budgets_text;
  std::string svg_path;
  std::string out_dir;  // defaults to the SVG's directory
  std::string dataset;
};

inline int cmd_pareto(const ParetoOptions& opt, const std::vector<std::string>& original_args) {
  detail::Timer timer;
  const std::vector<double> budgets = detail::parse_double_list(opt.budgets_text, "budget");
  for (double b : budgets)
    if (b <= 0.0) throw Error("budgets must be positive, got " + detail::format_value(b));
  const BenchmarkTable table = load_table(opt.bench_path);
  const std::vector<ProxyScore> scores = load_scores_jsonl(opt.scores_path);
  if (scores.empty()) throw Error("score file " + opt.scores_path + " is empty");
  const std::string proxy_id = scores.front().proxy;
  const ProxyInfo* info = find_proxy(proxy_id);
  const bool higher = info ? info->higher_is_better : true;

  std::string dataset = opt.dataset;
  if (dataset.empty()) {
    const auto all = table.datasets();
    if (all.size() != 1)
      throw Error("table has " + std::to_string(all.size()) +
                  " datasets; pick one with --dataset");
    dataset = all.front();
  }

  const JoinedScores join = attach_scores(table, scores);
  std::vector<ScoredPoint> points;
  for (std::size_t k = 0; k < join.rows.size(); ++k) {
    const BenchmarkRecord& rec = table.records[join.rows[k]];
    auto cost_it = rec.cost.find(opt.metric);
    if (cost_it == rec.cost.end())
      throw Error("arch " + rec.arch + " has no cost metric '" + opt.metric + "'");
    auto acc_it = rec.accuracy.find(dataset);
    if (acc_it == rec.accuracy.end())
      throw Error("arch " + rec.arch + " has no accuracy for dataset '" + dataset + "'");
    ScoredPoint p;
    p.index = static_cast<std::int64_t>(join.rows[k]);
    p.arch = rec.arch;
    p.cost = cost_it->second;
    p.accuracy = acc_it->second;
    p.proxy_value = higher ? join.values[k] : -join.values[k];
    p.sentinel = join.sentinel[k];
    points.push_back(std::move(p));
  }

  const ParetoComparison cmp =
      proxy_pareto_vs_truth(points, opt.metric, dataset, proxy_id, budgets);

  // SVG: all candidates, the ground-truth front, and the proxy picks placed
  // at their true accuracy.
  ScatterPlot plot;
  plot.title = "Pareto fronts under " + opt.metric + " (" + proxy_id + " vs ground truth)";
  plot.x_label = opt.metric;
  plot.y_label = "accuracy:" + dataset + " (%)";
  PlotSeries background{"candidates", "#b0b0b0", 2.0, false, {}};
  for (const auto& p : points) background.points.emplace_back(p.cost, p.accuracy);
  PlotSeries truth{"ground-truth front", "#1f77b4", 4.0, true, {}};
  for (const auto& p : cmp.truth_front.front) truth.points.emplace_back(p.cost, p.objective);
  PlotSeries picked{"proxy picks (" + proxy_id + ")", "#d62728", 4.0, true, {}};
  for (const auto& band : cmp.bands)
    if (band.feasible) picked.points.emplace_back(band.proxy.cost, band.proxy.objective);
  plot.series = {background, truth, picked};
  save_svg(plot, opt.svg_path);

  const std::filesystem::path out_dir =
      opt.out_dir.empty() ? std::filesystem::path(opt.svg_path).parent_path()
                          : std::filesystem::path(opt.out_dir);
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  const std::string gaps_path = (out_dir / "pareto_gaps.csv").string();
  const std::string fronts_path = (out_dir / "pareto_fronts.json").string();

  bool sentinel_band = false;
  {
    std::ofstream f(gaps_path);
    if (!f) throw IoError("cannot write " + gaps_path);
    f << "budget,feasible,flagged,truth_arch,truth_accuracy,proxy_arch,proxy_accuracy,gap,"
         "note\n";
    for (const auto& b : cmp.bands) {
      f << detail::format_value(b.budget) << "," << (b.feasible ? 1 : 0) << ","
        << (b.flagged ? 1 : 0) << ",";
      if (b.feasible)
        f << b.truth.arch << "," << detail::format_value(b.truth.objective) << "," << b.proxy.arch
          << "," << detail::format_value(b.proxy.objective) << "," << detail::format_value(b.gap);
      else
        f << ",,,,";
      f << "," << b.note << "\n";
      if (b.flagged && b.feasible) sentinel_band = true;
    }
  }
  {
    nlohmann::json j;
    j["metric"] = cmp.metric;
    j["dataset"] = cmp.dataset;
    j["proxy"] = cmp.proxy_id;
    j["truth_front"] = nlohmann::json::array();
    for (const auto& p : cmp.truth_front.front)
      j["truth_front"].push_back({{"arch", p.arch}, {"cost", p.cost}, {"accuracy", p.objective}});
    j["bands"] = nlohmann::json::array();
    for (const auto& b : cmp.bands) {
      nlohmann::json jb;
      jb["budget"] = b.budget;
      jb["feasible"] = b.feasible;
      jb["flagged"] = b.flagged;
      if (b.feasible) {
        jb["truth"] = {{"arch", b.truth.arch}, {"cost", b.truth.cost},
                       {"accuracy", b.truth.objective}};
        jb["proxy"] = {{"arch", b.proxy.arch}, {"cost", b.proxy.cost},
                       {"accuracy", b.proxy.objective}, {"raw_score", b.proxy_raw_score}};
        jb["gap"] = b.gap;
      }
      if (!b.note.empty()) jb["note"] = b.note;
      j["bands"].push_back(jb);
    }
    std::ofstream f(fronts_path);
    if (!f) throw IoError("cannot write " + fronts_path);
    f << j.dump(2) << "\n";
  }

  RunManifest manifest;
  manifest.command = "pareto";
  manifest.argv = original_args;
  manifest.config = {{"metric", opt.metric},
                     {"dataset", dataset},
                     {"budgets", budgets},
                     {"proxy", proxy_id}};
  manifest.inputs[opt.bench_path] = checksum_file(opt.bench_path);
  manifest.inputs[opt.scores_path] = checksum_file(opt.scores_path);
  manifest.outputs = {opt.svg_path, gaps_path, fronts_path};
  manifest.duration_ms = timer.ms();
  manifest.save((out_dir / "pareto.manifest.json").string());
  return sentinel_band ? kSentinel : kOk;
}

// ---------------------------------------------------------------------------
// fixture

inline int cmd_fixture(int n, std::uint64_t seed, double noise, const std::string& out_path,
                       const std::vector<std::string>& original_args) {
  detail::Timer timer;
  const BenchmarkTable table = generate_fixture(n, seed, noise);
  if (out_path.size() > 4 && out_path.compare(out_path.size() - 4, 4, ".csv") == 0)
    save_table_csv(table, out_path);
  else
    save_table_jsonl(table, out_path);

  RunManifest manifest;
  manifest.command = "fixture";
  manifest.argv = original_args;
  manifest.config = {{"n", n}, {"noise", noise}};
  manifest.seeds = {seed};
  manifest.outputs = {out_path};
  manifest.duration_ms = timer.ms();
  manifest.save(out_path + ".manifest.json");
  return kOk;
}

// ---------------------------------------------------------------------------
// dispatch + replay

inline int dispatch(const std::vector<std::string>& args, bool in_replay = false);

inline int cmd_replay(const std::string& manifest_path, bool skip_checksums, bool in_replay) {
  if (in_replay) throw Error("replay: manifests may not nest replay commands");
  const RunManifest manifest = RunManifest::load(manifest_path);
  if (!skip_checksums) {
    for (const auto& [path, checksum] : manifest.inputs) {
      const std::string now = checksum_file(path);
      if (now != checksum)
        throw Error("replay: input " + path + " changed since the manifest was written (" +
                    checksum + " -> " + now + "); pass --skip-checksums to override");
    }
  }
  std::cerr << "replay: re-running '" << manifest.command << "'\n";
  return dispatch(manifest.argv, /*in_replay=*/true);
}

inline int dispatch(const std::vector<std::string>& args, bool in_replay) {
  CLI::App app{"training-free architecture scoring and search"};
  app.require_subcommand(1);

  // score
  auto* score = app.add_subcommand("score", "score one architecture with one proxy");
  std::string score_arch, score_proxy, score_config, score_out;
  std::uint64_t score_seed = 0;
  score->add_option("--arch", score_arch, "arch string")->required();
  score->add_option("--proxy", score_proxy, "proxy id")->required();
  score->add_option("--config", score_config, "config file (JSON)");
  score->add_option("--seed", score_seed, "evaluation seed");
  score->add_option("--out", score_out, "write the score record (JSONL) here");

  // rank
  auto* rank = app.add_subcommand("rank", "score a set of architectures with several proxies");
  RankOptions rank_opt;
  std::string rank_proxies, rank_seeds;
  std::uint64_t rank_seed = 0;
  rank->add_option("--proxies", rank_proxies, "comma-separated proxy ids")->required();
  rank->add_option("--out", rank_opt.out_dir, "output directory")->required();
  rank->add_option("--bench", rank_opt.bench_path, "score the archs of this benchmark table");
  rank->add_option("--space", rank_opt.space, "search space (nb201-like)");
  rank->add_option("--limit", rank_opt.limit, "only the first N architectures");
  rank->add_option("--jobs", rank_opt.jobs, "parallel evaluation jobs");
  rank->add_option("--config", rank_opt.config_path, "config file (JSON)");
  rank->add_option("--seed", rank_seed, "evaluation seed");
  rank->add_option("--seeds", rank_seeds, "comma-separated seed list");

  // correlate
  auto* correlate = app.add_subcommand("correlate", "rank correlation of scores vs accuracy");
  CorrelateOptions corr_opt;
  correlate->add_option("--bench", corr_opt.bench_path, "benchmark table")->required();
  correlate->add_option("--scores", corr_opt.scores_path, "score file or directory")->required();
  correlate->add_option("--out", corr_opt.out_dir, "output directory")->required();
  correlate->add_option("--top-percent", corr_opt.top_percent,
                        "constrained subset percentage (default 5)");
  correlate->add_option("--dataset", corr_opt.dataset, "dataset id (default: all)");

  // pareto
  auto* pareto = app.add_subcommand("pareto", "proxy vs ground-truth Pareto fronts");
  ParetoOptions par_opt;
  pareto->add_option("--bench", par_opt.bench_path, "benchmark table")->required();
  pareto->add_option("--scores", par_opt.scores_path, "one proxy's score file")->required();
  pareto->add_option("--metric", par_opt.metric, "cost metric key")->required();
  pareto->add_option("--budgets", par_opt.budgets_text, "comma-separated budgets")->required();
  pareto->add_option("--svg", par_opt.svg_path, "scatter plot output")->required();
  pareto->add_option("--out", par_opt.out_dir, "directory for CSV/JSON outputs");
  pareto->add_option("--dataset", par_opt.dataset, "dataset id");

  // fixture
  auto* fixture = app.add_subcommand("fixture", "generate a synthetic benchmark table");
  int fx_n = 256;
  std::uint64_t fx_seed = 0;
  double fx_noise = kFixtureDefaultNoise;
  std::string fx_out;
  fixture->add_option("--n", fx_n, "number of architectures")->required();
  fixture->add_option("--seed", fx_seed, "generation seed");
  fixture->add_option("--noise", fx_noise, "accuracy noise level");
  fixture->add_option("--out", fx_out, "output table (.jsonl or .csv)")->required();

  // replay
  auto* replay = app.add_subcommand("replay", "re-run a command from its manifest");
  std::string replay_manifest;
  bool replay_skip = false;
  replay->add_option("--manifest", replay_manifest, "manifest file")->required();
  replay->add_flag("--skip-checksums", replay_skip, "skip input checksum verification");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (score->parsed())
      return cmd_score(score_arch, score_proxy, score_config, score_seed, score_out, args);
    if (rank->parsed()) {
      rank_opt.proxies = detail::split_list(rank_proxies);
      rank_opt.seeds = rank_seeds.empty() ? std::vector<std::uint64_t>{rank_seed}
                                          : detail::parse_seed_list(rank_seeds);
      return cmd_rank(rank_opt, args);
    }
    if (correlate->parsed()) return cmd_correlate(corr_opt, args);
    if (pareto->parsed()) return cmd_pareto(par_opt, args);
    if (fixture->parsed()) return cmd_fixture(fx_n, fx_seed, fx_noise, fx_out, args);
    if (replay->parsed()) return cmd_replay(replay_manifest, replay_skip, in_replay);
    throw Error("no subcommand given");
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
}

inline int run(const std::vector<std::string>& args) { return dispatch(args); }

}  // namespace zeronas::cli
