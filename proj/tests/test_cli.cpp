#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "zeronas/benchio.hpp"
#include "zeronas/cli.hpp"
#include "zeronas/config.hpp"

using namespace zeronas;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string micro_config_path(const fs::path& dir) {
  nlohmann::json j;
  j["macro"] = {{"stem_channels", 3},
                {"stages", {{{"cells", 1}, {"width", 3}}}},
                {"input_resolution", 6},
                {"num_classes", 4}};
  j["proxy"] = {{"batch", 3}, {"ntk_batch", 2}, {"ntk_seeds", 1}, {"zen_repeats", 2}};
  const std::string path = (dir / "config.json").string();
  std::ofstream(path) << j.dump(2);
  return path;
}

// Minimal well-formedness scan: every tag closes, attributes are quoted,
// nesting balances.
bool xml_well_formed(const std::string& text) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  if (text.rfind("<?xml", 0) == 0) {
    i = text.find("?>");
    if (i == std::string::npos) return false;
    i += 2;
  }
  while (i < text.size()) {
    if (text[i] != '<') {
      if (text[i] == '>') return false;
      ++i;
      continue;
    }
    const std::size_t end = text.find('>', i);
    if (end == std::string::npos) return false;
    std::string tag = text.substr(i + 1, end - i - 1);
    // quotes must balance inside the tag
    if (std::count(tag.begin(), tag.end(), '"') % 2 != 0) return false;
    const bool closing = !tag.empty() && tag[0] == '/';
    const bool self_closing = !tag.empty() && tag.back() == '/';
    std::string name = closing ? tag.substr(1) : tag;
    name = name.substr(0, name.find_first_of(" \t\n/"));
    if (name.empty()) return false;
    if (closing) {
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
    } else if (!self_closing) {
      stack.push_back(name);
    }
    i = end + 1;
  }
  return stack.empty();
}

const std::string kNoneArch = "|none~0|+|none~0|none~1|+|none~0|none~1|none~2|";

}  // namespace

TEST_CASE("cli requires a subcommand and rejects unknown flags") {
  REQUIRE(cli::run({}) == cli::kUsage);
  REQUIRE(cli::run({"rank", "--out", "/tmp/x"}) == cli::kUsage);  // missing --proxies
  REQUIRE(cli::run({"score", "--arch", kNoneArch}) == cli::kUsage);
}

TEST_CASE("score prints nn_mass 0 for the all-none cell and is repeatable") {
  const fs::path dir = fresh_dir("zn_cli_score");
  const std::string cfg = micro_config_path(dir);
  const std::string out1 = (dir / "a.jsonl").string();
  const std::string out2 = (dir / "b.jsonl").string();
  REQUIRE(cli::run({"score", "--arch", kNoneArch, "--proxy", "nn_mass", "--config", cfg,
                    "--out", out1}) == cli::kOk);
  REQUIRE(cli::run({"score", "--arch", kNoneArch, "--proxy", "nn_mass", "--config", cfg,
                    "--out", out2}) == cli::kOk);
  const auto s1 = load_scores_jsonl(out1);
  REQUIRE(s1.size() == 1);
  REQUIRE(s1[0].value == 0.0);
  REQUIRE(slurp(out1) == slurp(out2));
}

TEST_CASE("cli score equals the library call with the same fingerprint") {
  const fs::path dir = fresh_dir("zn_cli_equiv");
  const std::string cfg_path = micro_config_path(dir);
  const std::string out = (dir / "snip.jsonl").string();
  const std::string arch =
      "|conv_3x3~0|+|skip_connect~0|conv_1x1~1|+|avg_pool_3x3~0|none~1|conv_3x3~2|";
  REQUIRE(cli::run({"score", "--arch", arch, "--proxy", "snip", "--config", cfg_path, "--seed",
                    "7", "--out", out}) == cli::kOk);
  const ProxyScore cli_score = load_scores_jsonl(out).at(0);

  EngineConfig cfg = load_engine_config(cfg_path);
  cfg.proxy.init_seed = 7;
  const ProxyScore lib_score = evaluate_proxy(parse_arch(arch), cfg.macro, cfg.proxy, "snip");
  REQUIRE(cli_score.fingerprint == lib_score.fingerprint);
  REQUIRE(cli_score.value == lib_score.value);
}

TEST_CASE("score exits 3 on sentinel outcomes") {
  const fs::path dir = fresh_dir("zn_cli_sentinel");
  const std::string cfg = micro_config_path(dir);
  REQUIRE(cli::run({"score", "--arch", kNoneArch, "--proxy", "regions", "--config", cfg}) ==
          cli::kSentinel);
}

TEST_CASE("rank writes per-proxy score files that match library calls") {
  const fs::path dir = fresh_dir("zn_cli_rank");
  const std::string cfg_path = micro_config_path(dir);
  const std::string bench = (dir / "bench.jsonl").string();
  REQUIRE(cli::run({"fixture", "--n", "12", "--seed", "5", "--out", bench}) == cli::kOk);

  const std::string out_dir = (dir / "scores").string();
  REQUIRE(cli::run({"rank", "--proxies", "params,nn_mass", "--bench", bench, "--config",
                    cfg_path, "--out", out_dir, "--jobs", "2"}) == cli::kOk);

  const auto params_scores = load_scores_jsonl(out_dir + "/params.seed0.jsonl");
  REQUIRE(params_scores.size() == 12);
  const BenchmarkTable table = load_table(bench);
  EngineConfig cfg = load_engine_config(cfg_path);
  for (std::size_t i = 0; i < params_scores.size(); ++i) {
    REQUIRE(params_scores[i].arch == table.records[i].arch);
    const ProxyScore lib =
        evaluate_proxy(parse_arch(table.records[i].arch), cfg.macro, cfg.proxy, "params");
    REQUIRE(params_scores[i].value == lib.value);
  }
  REQUIRE(fs::exists(out_dir + "/rank.manifest.json"));

  // output bytes do not depend on the job count
  const std::string serial_dir = (dir / "scores1").string();
  REQUIRE(cli::run({"rank", "--proxies", "params,nn_mass", "--bench", bench, "--config",
                    cfg_path, "--out", serial_dir, "--jobs", "1"}) == cli::kOk);
  REQUIRE(slurp(serial_dir + "/params.seed0.jsonl") == slurp(out_dir + "/params.seed0.jsonl"));
  REQUIRE(slurp(serial_dir + "/nn_mass.seed0.jsonl") ==
          slurp(out_dir + "/nn_mass.seed0.jsonl"));
}

TEST_CASE("rank over the enumerated space respects --limit") {
  const fs::path dir = fresh_dir("zn_cli_rank_space");
  const std::string cfg_path = micro_config_path(dir);
  const std::string out_dir = (dir / "scores").string();
  REQUIRE(cli::run({"rank", "--proxies", "flops", "--space", "nb201-like", "--limit", "5",
                    "--config", cfg_path, "--out", out_dir}) == cli::kOk);
  const auto scores = load_scores_jsonl(out_dir + "/flops.seed0.jsonl");
  REQUIRE(scores.size() == 5);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    REQUIRE(scores[i].arch_index == static_cast<std::int64_t>(i));
    REQUIRE(scores[i].arch == serialize_arch(spec_at(static_cast<std::int64_t>(i))));
  }
  REQUIRE(cli::run({"rank", "--proxies", "flops", "--space", "weird", "--out", out_dir}) ==
          cli::kUsage);
}

TEST_CASE("rank resumes after an interrupted run without changing bytes") {
  const fs::path dir = fresh_dir("zn_cli_resume");
  const std::string cfg_path = micro_config_path(dir);
  const std::string bench = (dir / "bench.jsonl").string();
  REQUIRE(cli::run({"fixture", "--n", "10", "--seed", "2", "--out", bench}) == cli::kOk);

  const std::string out_dir = (dir / "scores").string();
  const std::vector<std::string> rank_args = {"rank",    "--proxies", "params,flops",
                                              "--bench", bench,       "--config",
                                              cfg_path,  "--out",     out_dir};
  REQUIRE(cli::run(rank_args) == cli::kOk);
  const std::string fresh_params = slurp(out_dir + "/params.seed0.jsonl");
  const std::string fresh_flops = slurp(out_dir + "/flops.seed0.jsonl");

  // Re-running a completed rank appends nothing.
  REQUIRE(cli::run(rank_args) == cli::kOk);
  REQUIRE(slurp(out_dir + "/params.seed0.jsonl") == fresh_params);

  // Truncate one file to simulate an interrupt; the resumed run completes it.
  {
    std::istringstream in(fresh_params);
    std::ostringstream head;
    std::string line;
    for (int i = 0; i < 4 && std::getline(in, line); ++i) head << line << "\n";
    std::ofstream(out_dir + "/params.seed0.jsonl", std::ios::trunc) << head.str();
  }
  REQUIRE(cli::run(rank_args) == cli::kOk);
  REQUIRE(slurp(out_dir + "/params.seed0.jsonl") == fresh_params);
  REQUIRE(slurp(out_dir + "/flops.seed0.jsonl") == fresh_flops);
}

TEST_CASE("rank records per-arch failures and keeps going") {
  const fs::path dir = fresh_dir("zn_cli_rank_err");
  const std::string cfg_path = micro_config_path(dir);
  const std::string bench = (dir / "bench.jsonl").string();
  // Three archs; the all-none cell cannot produce activation patterns.
  {
    BenchmarkTable t;
    for (std::int64_t idx : {0, 1000, 2000}) {
      BenchmarkRecord r;
      r.arch = serialize_arch(spec_at(idx));
      r.accuracy["synthetic"] = 50.0;
      t.records.push_back(r);
    }
    save_table_jsonl(t, bench);
  }
  const std::string out_dir = (dir / "scores").string();
  REQUIRE(cli::run({"rank", "--proxies", "regions", "--bench", bench, "--config", cfg_path,
                    "--out", out_dir}) == cli::kSentinel);
  const auto scores = load_scores_jsonl(out_dir + "/regions.seed0.jsonl");
  REQUIRE(scores.size() == 3);
  REQUIRE(scores[0].outcome == Outcome::error);  // all-none
  REQUIRE_FALSE(scores[0].error.empty());
}

TEST_CASE("correlate produces reports and matches the unconstrained subset") {
  const fs::path dir = fresh_dir("zn_cli_corr");
  const std::string cfg_path = micro_config_path(dir);
  const std::string bench = (dir / "bench.jsonl").string();
  REQUIRE(cli::run({"fixture", "--n", "64", "--seed", "9", "--out", bench}) == cli::kOk);
  const std::string scores_dir = (dir / "scores").string();
  REQUIRE(cli::run({"rank", "--proxies", "params", "--bench", bench, "--config", cfg_path,
                    "--out", scores_dir}) == cli::kOk);

  const std::string corr_dir = (dir / "corr").string();
  REQUIRE(cli::run({"correlate", "--bench", bench, "--scores", scores_dir, "--out",
                    corr_dir}) == cli::kOk);
  const std::string csv = slurp(corr_dir + "/correlation.csv");
  REQUIRE(csv.find("proxy,dataset,subset,spr,kt,n") == 0);
  REQUIRE(csv.find("params,synthetic,all,") != std::string::npos);
  REQUIRE(csv.find("top5%") != std::string::npos);

  const nlohmann::json rep = nlohmann::json::parse(slurp(corr_dir + "/correlation.json"));
  double spr_all = -2.0;
  for (const auto& r : rep.at("reports"))
    if (r.at("subset") == "all") spr_all = r.at("spr").get<double>();
  REQUIRE(spr_all >= 0.95);

  // --top-percent 100 equals the unconstrained computation
  const std::string corr100 = (dir / "corr100").string();
  REQUIRE(cli::run({"correlate", "--bench", bench, "--scores", scores_dir, "--out", corr100,
                    "--top-percent", "100"}) == cli::kOk);
  const nlohmann::json rep100 = nlohmann::json::parse(slurp(corr100 + "/correlation.json"));
  REQUIRE(rep100.at("reports").size() == 1);
  REQUIRE(rep100.at("reports")[0].at("spr").get<double>() == spr_all);
}

TEST_CASE("correlate reports missing score files precisely") {
  const fs::path dir = fresh_dir("zn_cli_corr_missing");
  const std::string bench = (dir / "bench.jsonl").string();
  REQUIRE(cli::run({"fixture", "--n", "8", "--seed", "1", "--out", bench}) == cli::kOk);
  REQUIRE(cli::run({"correlate", "--bench", bench, "--scores",
                    (dir / "nope.jsonl").string(), "--out", (dir / "c").string()}) == cli::kIo);
}

TEST_CASE("pareto with accuracy as the proxy yields zero gaps and valid svg") {
  const fs::path dir = fresh_dir("zn_cli_pareto");
  const std::string bench = (dir / "bench.jsonl").string();
  REQUIRE(cli::run({"fixture", "--n", "48", "--seed", "3", "--out", bench}) == cli::kOk);

  // Craft a score file whose values are the true accuracies.
  const BenchmarkTable table = load_table(bench);
  const std::string scores = (dir / "truth.jsonl").string();
  {
    std::ofstream f(scores);
    for (const auto& r : table.records) {
      ProxyScore s;
      s.arch = r.arch;
      s.proxy = "truth";
      s.value = r.accuracy.at("synthetic");
      f << score_to_json(s).dump() << "\n";
    }
  }
  const std::string svg = (dir / "fronts.svg").string();
  REQUIRE(cli::run({"pareto", "--bench", bench, "--scores", scores, "--metric",
                    "edgegpu_energy_mj", "--budgets", "5,10,20,40", "--svg", svg, "--out",
                    (dir / "p").string()}) == cli::kOk);
  const std::string svg_text = slurp(svg);
  REQUIRE(xml_well_formed(svg_text));
  REQUIRE(svg_text.find("edgegpu_energy_mj") != std::string::npos);

  const std::string gaps = slurp((dir / "p" / "pareto_gaps.csv").string());
  std::istringstream in(gaps);
  std::string line;
  std::getline(in, line);  // header
  int bands = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++bands;
    // gap column is the 8th field
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.at(1) == "1");  // feasible
    REQUIRE(std::stod(cells.at(7)) == 0.0);
  }
  REQUIRE(bands == 4);
}

TEST_CASE("pareto rejects malformed budget lists") {
  const fs::path dir = fresh_dir("zn_cli_pareto_bad");
  const std::string bench = (dir / "bench.jsonl").string();
  REQUIRE(cli::run({"fixture", "--n", "8", "--seed", "3", "--out", bench}) == cli::kOk);
  const std::string scores = (dir / "s.jsonl").string();
  {
    std::ofstream f(scores);
    ProxyScore s;
    s.arch = load_table(bench).records[0].arch;
    s.proxy = "params";
    s.value = 1.0;
    f << score_to_json(s).dump() << "\n";
  }
  REQUIRE(cli::run({"pareto", "--bench", bench, "--scores", scores, "--metric",
                    "edgegpu_energy_mj", "--budgets", "5,abc", "--svg",
                    (dir / "x.svg").string()}) == cli::kUsage);
}

TEST_CASE("fixture command matches the library generator") {
  const fs::path dir = fresh_dir("zn_cli_fixture");
  const std::string out = (dir / "fx.jsonl").string();
  REQUIRE(cli::run({"fixture", "--n", "16", "--seed", "11", "--noise", "0.5", "--out", out}) ==
          cli::kOk);
  const BenchmarkTable cli_table = load_table(out);
  const BenchmarkTable lib_table = generate_fixture(16, 11, 0.5);
  REQUIRE(cli_table.records.size() == lib_table.records.size());
  for (std::size_t i = 0; i < cli_table.records.size(); ++i) {
    REQUIRE(cli_table.records[i].arch == lib_table.records[i].arch);
    REQUIRE(cli_table.records[i].accuracy == lib_table.records[i].accuracy);
  }
  REQUIRE(fs::exists(out + ".manifest.json"));
}

TEST_CASE("replay reproduces outputs byte-identically and checks inputs") {
  const fs::path dir = fresh_dir("zn_cli_replay");
  const std::string cfg_path = micro_config_path(dir);
  const std::string bench = (dir / "bench.jsonl").string();
  REQUIRE(cli::run({"fixture", "--n", "6", "--seed", "4", "--out", bench}) == cli::kOk);

  const std::string out_dir = (dir / "scores").string();
  REQUIRE(cli::run({"rank", "--proxies", "params,snip", "--bench", bench, "--config", cfg_path,
                    "--out", out_dir, "--seed", "3"}) == cli::kOk);
  const std::string manifest = out_dir + "/rank.manifest.json";
  const std::string params_bytes = slurp(out_dir + "/params.seed3.jsonl");
  const std::string snip_bytes = slurp(out_dir + "/snip.seed3.jsonl");

  fs::remove(out_dir + "/params.seed3.jsonl");
  fs::remove(out_dir + "/snip.seed3.jsonl");
  REQUIRE(cli::run({"replay", "--manifest", manifest}) == cli::kOk);
  REQUIRE(slurp(out_dir + "/params.seed3.jsonl") == params_bytes);
  REQUIRE(slurp(out_dir + "/snip.seed3.jsonl") == snip_bytes);

  // Tampered inputs are refused.
  std::ofstream(bench, std::ios::app) << "\n";
  REQUIRE(cli::run({"replay", "--manifest", manifest}) == cli::kUsage);
}

TEST_CASE("the config environment variable supplies the default config") {
  const fs::path dir = fresh_dir("zn_cli_env");
  const std::string cfg = micro_config_path(dir);
  const std::string with_flag = (dir / "flag.jsonl").string();
  const std::string with_env = (dir / "env.jsonl").string();
  const std::string arch = "|conv_1x1~0|+|none~0|skip_connect~1|+|none~0|none~1|skip_connect~2|";
  REQUIRE(cli::run({"score", "--arch", arch, "--proxy", "params", "--config", cfg, "--out",
                    with_flag}) == cli::kOk);
  setenv("ZERONAS_CONFIG", cfg.c_str(), 1);
  REQUIRE(cli::run({"score", "--arch", arch, "--proxy", "params", "--out", with_env}) ==
          cli::kOk);
  unsetenv("ZERONAS_CONFIG");
  REQUIRE(load_scores_jsonl(with_flag).at(0).value == load_scores_jsonl(with_env).at(0).value);
  REQUIRE(load_scores_jsonl(with_flag).at(0).fingerprint ==
          load_scores_jsonl(with_env).at(0).fingerprint);
}

TEST_CASE("the built binary runs end to end") {
  const fs::path dir = fresh_dir("zn_cli_bin");
  const std::string cmd = std::string(ZERONAS_CLI_PATH) + " score --arch '" + kNoneArch +
                          "' --proxy nn_mass --config " + micro_config_path(dir) + " > " +
                          (dir / "out.txt").string();
  REQUIRE(std::system(cmd.c_str()) == 0);
  const std::string out = slurp((dir / "out.txt").string());
  REQUIRE(out.find("0") != std::string::npos);

  const std::string bad = std::string(ZERONAS_CLI_PATH) + " score --arch bogus --proxy params";
  const int code = std::system(bad.c_str());
  REQUIRE(WEXITSTATUS(code) == cli::kUsage);
}
