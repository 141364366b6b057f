#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "zeronas/benchio.hpp"
#include "zeronas/metrics.hpp"

using namespace zeronas;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

const char* kGoodJsonl =
    R"({"arch": "|none~0|+|none~0|none~1|+|none~0|none~1|none~2|", "accuracy": {"cifar100": 71.11}, "cost": {"edgegpu_energy_mj": 9.5}, "params_m": 0.83, "flops_m": 113.9})"
    "\n"
    R"({"arch": "|skip_connect~0|+|none~0|none~1|+|none~0|none~1|none~2|", "accuracy": {"cifar100": 60.0}, "cost": {"edgegpu_energy_mj": 4.5}, "params_m": 0.4, "flops_m": 50.0, "note": "kept"})"
    "\n"
    R"({"arch": "|conv_3x3~0|+|none~0|none~1|+|none~0|none~1|none~2|", "accuracy": {"cifar100": 73.5}, "cost": {"edgegpu_energy_mj": 19.0}, "params_m": 1.3, "flops_m": 210.0})"
    "\n";

}  // namespace

TEST_CASE("well-formed jsonl loads into a table of three") {
  const std::string path = temp_path("zn_good.jsonl");
  std::ofstream(path) << kGoodJsonl;
  const BenchmarkTable t = load_table(path);
  REQUIRE(t.records.size() == 3);
  REQUIRE(t.find("|none~0|+|none~0|none~1|+|none~0|none~1|none~2|") != nullptr);
  REQUIRE(t.records[0].accuracy.at("cifar100") == 71.11);
  REQUIRE(t.records[1].extra.contains("note"));
  REQUIRE_FALSE(t.checksum.empty());
}

TEST_CASE("duplicate archs name both line numbers") {
  const std::string path = temp_path("zn_dup.jsonl");
  {
    std::ofstream f(path);
    f << R"({"arch": "|none~0|+|none~0|none~1|+|none~0|none~1|none~2|"})" << "\n";
    f << R"({"arch": "|none~0|+|none~0|none~1|+|none~0|none~1|none~2|"})" << "\n";
  }
  try {
    load_table(path);
    FAIL("expected duplicate error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find("lines 1 and 2") != std::string::npos);
  }
}

TEST_CASE("malformed records abort with line numbers unless lenient") {
  const std::string path = temp_path("zn_bad.jsonl");
  {
    std::ofstream f(path);
    f << R"({"arch": "|none~0|+|none~0|none~1|+|none~0|none~1|none~2|"})" << "\n";
    f << "{not json}\n";
    f << R"({"arch": "|bogus~0|+|none~0|none~1|+|none~0|none~1|none~2|"})" << "\n";
    f << R"({"arch": "|skip_connect~0|+|none~0|none~1|+|none~0|none~1|none~2|", "accuracy": {"c": 150.0}})"
      << "\n";
    f << R"({"arch": "|conv_1x1~0|+|none~0|none~1|+|none~0|none~1|none~2|", "cost": {"edgegpu_watts": 3}})"
      << "\n";
  }
  try {
    load_table(path);
    FAIL("expected malformed-record error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find("line 2") != std::string::npos);
    REQUIRE(msg.find("line 3") != std::string::npos);
    REQUIRE(msg.find("line 4") != std::string::npos);
    REQUIRE(msg.find("line 5") != std::string::npos);
    REQUIRE(msg.find("unknown unit suffix") != std::string::npos);
  }
  LoadOptions lenient;
  lenient.lenient = true;
  const BenchmarkTable t = load_table(path, lenient);
  REQUIRE(t.records.size() == 1);
}

TEST_CASE("jsonl round-trip is semantically equal with extras preserved") {
  const std::string path = temp_path("zn_rt.jsonl");
  std::ofstream(path) << kGoodJsonl;
  const BenchmarkTable t = load_table(path);
  const std::string out = temp_path("zn_rt_out.jsonl");
  save_table_jsonl(t, out);
  const BenchmarkTable t2 = load_table(out);
  REQUIRE(t2.records.size() == t.records.size());
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    REQUIRE(t2.records[i].arch == t.records[i].arch);
    REQUIRE(t2.records[i].accuracy == t.records[i].accuracy);
    REQUIRE(t2.records[i].cost == t.records[i].cost);
    REQUIRE(t2.records[i].params_m == t.records[i].params_m);
    REQUIRE(t2.records[i].flops_m == t.records[i].flops_m);
    REQUIRE(t2.records[i].extra == t.records[i].extra);
  }
}

TEST_CASE("csv round-trip preserves the schema fields") {
  const std::string path = temp_path("zn_csv_src.jsonl");
  std::ofstream(path) << kGoodJsonl;
  const BenchmarkTable t = load_table(path);
  const std::string csv = temp_path("zn_rt.csv");
  save_table_csv(t, csv);
  const BenchmarkTable t2 = load_table(csv);
  REQUIRE(t2.records.size() == t.records.size());
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    REQUIRE(t2.records[i].arch == t.records[i].arch);
    REQUIRE(t2.records[i].accuracy == t.records[i].accuracy);
    REQUIRE(t2.records[i].cost == t.records[i].cost);
  }
}

TEST_CASE("opaque arch ids need an explicit opt-in") {
  const std::string path = temp_path("zn_opaque.jsonl");
  std::ofstream(path) << R"({"arch": "resnet50-width1.5", "accuracy": {"imagenet": 80.1}})"
                      << "\n";
  REQUIRE_THROWS_AS(load_table(path), Error);
  LoadOptions opts;
  opts.opaque_archs = true;
  const BenchmarkTable t = load_table(path, opts);
  REQUIRE(t.records.size() == 1);
  REQUIRE(t.records[0].arch == "resnet50-width1.5");
}

TEST_CASE("missing files raise io errors") {
  REQUIRE_THROWS_AS(load_table("/nonexistent/zn.jsonl"), IoError);
  REQUIRE_THROWS_AS(load_scores_jsonl("/nonexistent/zn_scores.jsonl"), IoError);
}

TEST_CASE("fixture generation is pure and monotone without noise") {
  const BenchmarkTable a = generate_fixture(64, 3, 0.0);
  const BenchmarkTable b = generate_fixture(64, 3, 0.0);
  REQUIRE(a.records.size() == 64);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    REQUIRE(a.records[i].arch == b.records[i].arch);
    REQUIRE(a.records[i].accuracy == b.records[i].accuracy);
    REQUIRE(a.records[i].cost == b.records[i].cost);
  }
  // noise = 0: accuracy is a strictly monotone map of params (up to
  // clipping), so the rank correlation is 1.
  std::vector<double> params, acc;
  for (const auto& r : a.records) {
    params.push_back(r.params_m);
    acc.push_back(r.accuracy.at("synthetic"));
  }
  REQUIRE(spearman_rho(params, acc) == 1.0);
}

TEST_CASE("fixture at the default noise keeps params highly correlated") {
  const BenchmarkTable t = generate_fixture(256, 7, kFixtureDefaultNoise);
  std::vector<double> params, acc;
  for (const auto& r : t.records) {
    params.push_back(r.params_m);
    acc.push_back(r.accuracy.at("synthetic"));
  }
  REQUIRE(spearman_rho(params, acc) >= 0.95);
}

TEST_CASE("fixture rejects impossible sizes") {
  REQUIRE_THROWS_AS(generate_fixture(15626, 0), Error);
  REQUIRE_THROWS_AS(generate_fixture(0, 0), Error);
  REQUIRE_NOTHROW(generate_fixture(1, 0));
}

TEST_CASE("attach_scores inner-joins on arch strings") {
  const BenchmarkTable t = generate_fixture(8, 5, 0.5);
  // An arch guaranteed absent from the 8-row table.
  std::string stray_arch;
  for (std::int64_t i = 0; i < kSpaceSize; ++i) {
    const std::string a = serialize_arch(spec_at(i));
    if (!t.index.count(a)) {
      stray_arch = a;
      break;
    }
  }
  std::vector<ProxyScore> scores;
  for (std::size_t i = 0; i < t.records.size(); i += 2) {
    ProxyScore s;
    s.arch = t.records[i].arch;
    s.proxy = "params";
    s.value = static_cast<double>(i);
    scores.push_back(s);
  }
  ProxyScore stray;
  stray.arch = stray_arch;
  stray.proxy = "params";
  scores.push_back(stray);

  const JoinedScores j = attach_scores(t, scores);
  REQUIRE(j.rows == std::vector<std::size_t>({0, 2, 4, 6}));
  REQUIRE(j.values.size() == 4);
  REQUIRE(j.unmatched == std::vector<std::string>({stray_arch}));

  std::vector<ProxyScore> nothing = {stray};
  REQUIRE_THROWS_AS(attach_scores(t, nothing), Error);
}

TEST_CASE("score records round-trip through jsonl") {
  ProxyScore s;
  s.arch = "|none~0|+|none~0|none~1|+|none~0|none~1|none~2|";
  s.arch_index = 0;
  s.proxy = "ntk_cond";
  s.outcome = Outcome::ill_conditioned;
  s.seed = 42;
  s.fingerprint = "fp";
  s.diagnostics = {"seed 0: vanished"};
  const std::string path = temp_path("zn_scores.jsonl");
  {
    std::ofstream f(path);
    f << score_to_json(s).dump() << "\n";
    ProxyScore ok = s;
    ok.outcome = Outcome::ok;
    ok.value = 3.5;
    ok.diagnostics.clear();
    f << score_to_json(ok).dump() << "\n";
  }
  const auto loaded = load_scores_jsonl(path);
  REQUIRE(loaded.size() == 2);
  REQUIRE(loaded[0].outcome == Outcome::ill_conditioned);
  REQUIRE(loaded[0].seed == 42);
  REQUIRE(loaded[0].diagnostics.size() == 1);
  REQUIRE(loaded[1].ok());
  REQUIRE(loaded[1].value == 3.5);
}
