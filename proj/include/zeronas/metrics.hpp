#pragma once

// Rank-correlation statistics between proxy scores and benchmark accuracies,
// including the constrained top-p% analysis.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "zeronas/common.hpp"

namespace zeronas {

// Average ranks (1-based), ties receive the mean of the ranks they occupy.
inline std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

// Spearman's rho: Pearson correlation of average ranks.
inline double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error("spearman_rho: input lengths differ");
  if (x.size() < 2) throw Error("spearman_rho: need at least 2 observations");
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = rx[i] - mx, dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw NumericError("spearman_rho: degenerate ranking (all values tied)");
  return sxy / std::sqrt(sxx * syy);
}

// Kendall's tau-b by O(n^2) pair counting with tie correction.
inline double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error("kendall_tau: input lengths differ");
  const std::size_t n = x.size();
  if (n < 2) throw Error("kendall_tau: need at least 2 observations");
  std::int64_t concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0.0 && dy == 0.0) continue;
      if (dx == 0.0) {
        ++ties_x;
      } else if (dy == 0.0) {
        ++ties_y;
      } else if ((dx > 0.0) == (dy > 0.0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double n0 = static_cast<double>(n) * (n - 1) / 2.0;
  // ties_x counts pairs tied in x but not y (and vice versa); pairs tied in
  // both are excluded from all four counters, so n1/n2 reconstruct as below.
  double tied_both = n0 - concordant - discordant - ties_x - ties_y;
  const double n1 = ties_x + tied_both;
  const double n2 = ties_y + tied_both;
  const double denom = std::sqrt((n0 - n1) * (n0 - n2));
  if (denom == 0.0) throw NumericError("kendall_tau: degenerate ranking (all values tied)");
  return (static_cast<double>(concordant) - static_cast<double>(discordant)) / denom;
}

// Indices of the ceil(p*N/100) highest-accuracy entries. Boundary ties are
// broken by ascending entry index, so the subset is deterministic.
inline std::vector<std::size_t> constrained_subset(const std::vector<double>& accuracy,
                                                   double p_percent) {
  if (accuracy.empty()) throw Error("constrained_subset: empty table");
  if (p_percent <= 0.0 || p_percent > 100.0)
    throw Error("constrained_subset: p must be in (0, 100], got " + std::to_string(p_percent));
  const std::size_t n = accuracy.size();
  const std::size_t k = static_cast<std::size_t>(
      std::ceil(p_percent * static_cast<double>(n) / 100.0));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (accuracy[a] != accuracy[b]) return accuracy[a] > accuracy[b];
    return a < b;
  });
  order.resize(std::min(k, n));
  std::sort(order.begin(), order.end());
  return order;
}

// Maps sentinel-valued scores to a value strictly worse than every numeric
// score (tied among themselves), respecting the proxy's orientation.
inline std::vector<double> map_sentinels_rank_worst(const std::vector<double>& values,
                                                    const std::vector<bool>& is_sentinel,
                                                    bool higher_is_better) {
  if (values.size() != is_sentinel.size())
    throw Error("map_sentinels_rank_worst: length mismatch");
  double best_known = higher_is_better ? std::numeric_limits<double>::infinity()
                                       : -std::numeric_limits<double>::infinity();
  bool any_numeric = false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (is_sentinel[i]) continue;
    any_numeric = true;
    best_known = higher_is_better ? std::min(best_known, values[i])
                                  : std::max(best_known, values[i]);
  }
  const double worst = any_numeric ? (higher_is_better ? best_known - 1.0 : best_known + 1.0)
                                   : 0.0;
  std::vector<double> out(values);
  for (std::size_t i = 0; i < values.size(); ++i)
    if (is_sentinel[i]) out[i] = worst;
  return out;
}

struct SubsetSpec {
  double top_percent = 100.0;  // 100 = unconstrained
  std::string label() const {
    if (top_percent >= 100.0) return "all";
    std::string p = std::to_string(top_percent);
    p.erase(p.find_last_not_of('0') + 1);
    if (!p.empty() && p.back() == '.') p.pop_back();
    return "top" + p + "%";
  }
};

struct CorrelationReport {
  std::string proxy;
  std::string dataset;
  std::string subset;
  double spearman = 0.0;
  double kendall = 0.0;
  std::size_t sample_count = 0;
  std::size_t seed_count = 1;
  std::size_t sentinel_count = 0;
  bool valid = true;
  std::string warning;
};

struct SeedScores {
  std::uint64_t seed = 0;
  std::vector<double> values;       // aligned with the accuracy vector
  std::vector<bool> is_sentinel;    // same length
};

// One report per subset for a single proxy/dataset pair. With several seeds
// the correlations (not the scores) are averaged; the convention is recorded
// in the report metadata downstream.
inline std::vector<CorrelationReport> correlate_proxy(
    const std::string& proxy, bool higher_is_better, const std::string& dataset,
    const std::vector<double>& accuracy, const std::vector<SeedScores>& seeds,
    const std::vector<SubsetSpec>& subsets) {
  std::vector<CorrelationReport> out;
  for (const auto& subset : subsets) {
    CorrelationReport rep;
    rep.proxy = proxy;
    rep.dataset = dataset;
    rep.subset = subset.label();
    rep.seed_count = seeds.size();
    const std::vector<std::size_t> idx = constrained_subset(accuracy, subset.top_percent);
    rep.sample_count = idx.size();
    if (idx.size() < 2) {
      rep.valid = false;
      rep.warning = "fewer than 2 architectures in subset";
      out.push_back(rep);
      continue;
    }
    std::vector<double> acc_sub(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) acc_sub[i] = accuracy[idx[i]];
    double spr_sum = 0.0, kt_sum = 0.0;
    std::size_t used_seeds = 0;
    std::string last_warning;
    for (const auto& seed : seeds) {
      if (seed.values.size() != accuracy.size())
        throw Error("correlate_proxy: score vector length mismatch for proxy " + proxy);
      const std::vector<double> mapped =
          map_sentinels_rank_worst(seed.values, seed.is_sentinel, higher_is_better);
      std::vector<double> val_sub(idx.size());
      std::size_t sentinels = 0;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        val_sub[i] = mapped[idx[i]];
        if (seed.is_sentinel[idx[i]]) ++sentinels;
      }
      rep.sentinel_count += sentinels;
      if (idx.size() - sentinels < 2) {
        last_warning = "fewer than 2 valid scores in subset";
        continue;
      }
      try {
        spr_sum += spearman_rho(val_sub, acc_sub);
        kt_sum += kendall_tau(val_sub, acc_sub);
        ++used_seeds;
      } catch (const NumericError& e) {
        last_warning = e.what();
      }
    }
    if (used_seeds == 0) {
      rep.valid = false;
      rep.warning = last_warning.empty() ? "no usable seeds" : last_warning;
    } else {
      rep.spearman = spr_sum / static_cast<double>(used_seeds);
      rep.kendall = kt_sum / static_cast<double>(used_seeds);
      if (!last_warning.empty()) rep.warning = last_warning;
    }
    out.push_back(rep);
  }
  return out;
}

}  // namespace zeronas
