#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "zeronas/metrics.hpp"
#include "zeronas/rng.hpp"

using namespace zeronas;

TEST_CASE("spearman trivial orderings") {
  REQUIRE(spearman_rho({1, 2, 3, 4}, {1, 2, 3, 4}) == 1.0);
  REQUIRE(spearman_rho({4, 3, 2, 1}, {1, 2, 3, 4}) == -1.0);
}

TEST_CASE("spearman matches the average-rank Pearson oracle with ties") {
  RngState rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + static_cast<int>(rng.next_below(30));
    std::vector<double> x(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
    for (double& v : x) v = static_cast<double>(rng.next_below(8));  // injected ties
    for (double& v : y) v = rng.normal();
    // skip degenerate all-tied draws
    bool tied = true;
    for (double v : x) tied = tied && v == x[0];
    if (tied) continue;
    REQUIRE(std::abs(spearman_rho(x, y) - oracles::spearman_reference(x, y)) < 1e-12);
  }
}

TEST_CASE("spearman rejects degenerate rankings") {
  REQUIRE_THROWS_AS(spearman_rho({1, 1, 1}, {1, 2, 3}), NumericError);
  REQUIRE_THROWS_AS(spearman_rho({1}, {2}), Error);
}

TEST_CASE("kendall trivial and hand-counted cases") {
  REQUIRE(kendall_tau({1, 2, 3, 4}, {10, 20, 30, 40}) == 1.0);
  // x=(1,2,3), y=(1,3,2): 2 concordant, 1 discordant over 3 pairs -> 1/3
  REQUIRE(std::abs(kendall_tau({1, 2, 3}, {1, 3, 2}) - 1.0 / 3.0) < 1e-15);
  REQUIRE_THROWS_AS(kendall_tau({2, 2, 2}, {1, 2, 3}), NumericError);
}

TEST_CASE("kendall matches the tie-corrected reference on random vectors") {
  RngState rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + static_cast<int>(rng.next_below(25));
    std::vector<double> x(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
    for (double& v : x) v = static_cast<double>(rng.next_below(6));
    for (double& v : y) v = static_cast<double>(rng.next_below(6));
    bool xt = true, yt = true;
    for (double v : x) xt = xt && v == x[0];
    for (double v : y) yt = yt && v == y[0];
    if (xt || yt) continue;
    REQUIRE(std::abs(kendall_tau(x, y) - oracles::kendall_reference(x, y)) < 1e-12);
  }
}

TEST_CASE("rank statistics are invariant under strictly increasing transforms") {
  RngState rng(10);
  std::vector<double> x(20), y(20);
  for (double& v : x) v = rng.normal();
  for (double& v : y) v = rng.normal();
  std::vector<double> fx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) fx[i] = std::exp(2.0 * x[i]) + 5.0;
  REQUIRE(std::abs(kendall_tau(fx, y) - kendall_tau(x, y)) < 1e-14);
  REQUIRE(std::abs(spearman_rho(fx, y) - spearman_rho(x, y)) < 1e-14);
}

TEST_CASE("constrained_subset picks the top slice deterministically") {
  std::vector<double> acc(100);
  RngState rng(11);
  for (double& v : acc) v = rng.uniform(0.0, 100.0);

  const auto all = constrained_subset(acc, 100.0);
  REQUIRE(all.size() == 100);

  const auto top5 = constrained_subset(acc, 5.0);
  REQUIRE(top5.size() == 5);
  double worst_kept = 1e300;
  for (std::size_t i : top5) worst_kept = std::min(worst_kept, acc[i]);
  for (std::size_t i = 0; i < acc.size(); ++i) {
    bool kept = false;
    for (std::size_t j : top5) kept = kept || j == i;
    if (!kept) REQUIRE(acc[i] <= worst_kept);
  }

  REQUIRE_THROWS_AS(constrained_subset({}, 5.0), Error);
  REQUIRE_THROWS_AS(constrained_subset(acc, 0.0), Error);
  REQUIRE_THROWS_AS(constrained_subset(acc, 101.0), Error);
}

TEST_CASE("constrained_subset matches the sort-then-cut oracle on boundary ties") {
  RngState rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 10 + static_cast<int>(rng.next_below(90));
    std::vector<double> acc(static_cast<std::size_t>(n));
    for (double& v : acc) v = static_cast<double>(rng.next_below(5));  // heavy ties
    const double p = 1.0 + 99.0 * rng.uniform();
    REQUIRE(constrained_subset(acc, p) == oracles::top_subset_reference(acc, p));
  }
}

TEST_CASE("sentinels map strictly worse than all numeric scores") {
  const std::vector<double> values = {5.0, 0.0, -3.0, 0.0};
  const std::vector<bool> sentinel = {false, true, false, true};
  const auto up = map_sentinels_rank_worst(values, sentinel, /*higher_is_better=*/true);
  REQUIRE(up[1] == up[3]);
  REQUIRE(up[1] < -3.0);
  const auto down = map_sentinels_rank_worst(values, sentinel, /*higher_is_better=*/false);
  REQUIRE(down[1] == down[3]);
  REQUIRE(down[1] > 5.0);
}

TEST_CASE("correlate_proxy averages correlations over seeds and reports subsets") {
  // accuracy strictly increasing; seed 0 agrees, seed 1 is reversed.
  const std::size_t n = 40;
  std::vector<double> acc(n);
  for (std::size_t i = 0; i < n; ++i) acc[i] = static_cast<double>(i);
  SeedScores s0, s1;
  s0.seed = 0;
  s1.seed = 1;
  for (std::size_t i = 0; i < n; ++i) {
    s0.values.push_back(static_cast<double>(i));
    s1.values.push_back(static_cast<double>(n - i));
    s0.is_sentinel.push_back(false);
    s1.is_sentinel.push_back(false);
  }
  const auto reports =
      correlate_proxy("toy", true, "ds", acc, {s0, s1}, {{100.0}, {10.0}});
  REQUIRE(reports.size() == 2);
  REQUIRE(reports[0].subset == "all");
  REQUIRE(reports[1].subset == "top10%");
  // +1 and -1 average to 0 for both statistics
  REQUIRE(std::abs(reports[0].spearman) < 1e-12);
  REQUIRE(std::abs(reports[0].kendall) < 1e-12);
  REQUIRE(reports[0].sample_count == n);
  REQUIRE(reports[1].sample_count == 4);
}

TEST_CASE("subset at 100 percent equals the unconstrained correlation") {
  RngState rng(14);
  std::vector<double> acc(30), val(30);
  for (double& v : acc) v = rng.normal();
  for (double& v : val) v = rng.normal();
  SeedScores s;
  s.seed = 0;
  s.values = val;
  s.is_sentinel.assign(val.size(), false);
  const auto reports = correlate_proxy("p", true, "d", acc, {s}, {{100.0}});
  REQUIRE(reports[0].spearman == spearman_rho(val, acc));
  REQUIRE(reports[0].kendall == kendall_tau(val, acc));
}

TEST_CASE("proxies with too few valid scores are reported as warnings") {
  std::vector<double> acc = {1.0, 2.0, 3.0};
  SeedScores s;
  s.seed = 0;
  s.values = {0.0, 0.0, 5.0};
  s.is_sentinel = {true, true, false};  // only one numeric score
  const auto reports = correlate_proxy("p", true, "d", acc, {s}, {{100.0}});
  REQUIRE(reports.size() == 1);
  REQUIRE_FALSE(reports[0].valid);
  REQUIRE_FALSE(reports[0].warning.empty());
}
