#pragma once

// Proxy-guided selection: constrained argmax, Pareto-front extraction under
// (minimize cost, maximize objective), proxy-vs-truth front comparison, and
// tournament evolutionary search over the cell space.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "zeronas/arch.hpp"
#include "zeronas/common.hpp"
#include "zeronas/rng.hpp"

namespace zeronas {

struct HwConstraint {
  std::string metric;  // e.g. edgegpu_energy_mj
  double budget = 0.0;

  void validate() const {
    if (budget <= 0.0) throw Error("hardware constraint budget must be > 0");
  }
};

struct SearchCandidate {
  std::int64_t index = 0;  // architecture index; the deterministic tie-breaker
  std::string arch;
  double objective = 0.0;  // oriented so that higher is better
  double cost = 0.0;
  bool sentinel = false;  // ranks strictly worse than every numeric objective
};

struct ArgmaxResult {
  SearchCandidate best;
  bool all_sentinel = false;  // every feasible candidate carried a sentinel
};

// Feasible candidate maximizing the objective; ties broken by lowest
// architecture index. An unsatisfiable constraint raises an error carrying
// the tightest budget that would have admitted a candidate.
inline ArgmaxResult constrained_argmax(const std::vector<SearchCandidate>& candidates,
                                       const HwConstraint* constraint = nullptr) {
  if (candidates.empty()) throw Error("constrained_argmax: no candidates");
  if (constraint) constraint->validate();
  const SearchCandidate* best = nullptr;
  double tightest = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    if (constraint) {
      tightest = std::min(tightest, c.cost);
      if (c.cost > constraint->budget) continue;
    }
    if (!best) {
      best = &c;
      continue;
    }
    const double a = c.sentinel ? -std::numeric_limits<double>::infinity() : c.objective;
    const double b = best->sentinel ? -std::numeric_limits<double>::infinity() : best->objective;
    if (a > b || (a == b && c.index < best->index)) best = &c;
  }
  if (!best)
    throw Error("no feasible architecture under " + constraint->metric + " <= " +
                std::to_string(constraint->budget) + "; tightest feasible budget is " +
                std::to_string(tightest));
  ArgmaxResult r;
  r.best = *best;
  r.all_sentinel = best->sentinel;
  return r;
}

struct ParetoPoint {
  std::int64_t index = 0;
  std::string arch;
  double cost = 0.0;
  double objective = 0.0;
};

struct ParetoResult {
  std::vector<ParetoPoint> front;  // sorted by cost ascending
  std::string objective_desc;     // "accuracy:<dataset>" or "proxy:<id>"
  std::string metric;
};

// Maximal non-dominated subset under strict dominance (<= cost, >= objective,
// strictly better in at least one). Duplicate (cost, objective) points keep
// the lowest architecture index.
inline ParetoResult pareto_front(std::vector<ParetoPoint> points, std::string objective_desc,
                                 std::string metric) {
  if (points.empty()) throw Error("pareto_front: empty input");
  std::sort(points.begin(), points.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.objective != b.objective) return a.objective > b.objective;
    return a.index < b.index;
  });
  ParetoResult r;
  r.objective_desc = std::move(objective_desc);
  r.metric = std::move(metric);
  double best_obj = -std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    if (p.objective > best_obj) {
      r.front.push_back(p);
      best_obj = p.objective;
    }
  }
  return r;
}

struct BudgetBand {
  double budget = 0.0;
  bool feasible = true;
  bool flagged = false;  // sentinel-only proxy scores or infeasible budget
  std::string note;
  ParetoPoint truth;          // ground-truth pick (objective = true accuracy)
  ParetoPoint proxy;          // proxy pick, objective = true accuracy after re-scoring
  double proxy_raw_score = 0.0;
  double gap = 0.0;  // truth accuracy - proxy pick's true accuracy
};

struct ParetoComparison {
  std::string metric;
  std::string dataset;
  std::string proxy_id;
  ParetoResult truth_front;  // global front under true accuracy
  std::vector<BudgetBand> bands;
};

struct ScoredPoint {
  std::int64_t index = 0;
  std::string arch;
  double cost = 0.0;
  double accuracy = 0.0;
  double proxy_value = 0.0;  // oriented so that higher is better
  bool sentinel = false;
};

// Per-budget constrained argmax on the proxy, re-scored with true accuracy,
// against the ground-truth selection.
inline ParetoComparison proxy_pareto_vs_truth(const std::vector<ScoredPoint>& points,
                                              const std::string& metric,
                                              const std::string& dataset,
                                              const std::string& proxy_id,
                                              const std::vector<double>& budgets) {
  if (points.empty()) throw Error("proxy_pareto_vs_truth: no candidates");
  ParetoComparison cmp;
  cmp.metric = metric;
  cmp.dataset = dataset;
  cmp.proxy_id = proxy_id;

  std::vector<ParetoPoint> truth_points;
  std::vector<SearchCandidate> truth_cands, proxy_cands;
  truth_points.reserve(points.size());
  for (const auto& p : points) {
    truth_points.push_back({p.index, p.arch, p.cost, p.accuracy});
    truth_cands.push_back({p.index, p.arch, p.accuracy, p.cost, false});
    proxy_cands.push_back({p.index, p.arch, p.proxy_value, p.cost, p.sentinel});
  }
  cmp.truth_front = pareto_front(std::move(truth_points), "accuracy:" + dataset, metric);

  for (double budget : budgets) {
    BudgetBand band;
    band.budget = budget;
    HwConstraint hw{metric, budget};
    try {
      const ArgmaxResult truth = constrained_argmax(truth_cands, &hw);
      const ArgmaxResult proxy = constrained_argmax(proxy_cands, &hw);
      band.truth = {truth.best.index, truth.best.arch, truth.best.cost, truth.best.objective};
      band.proxy_raw_score = proxy.best.objective;
      double proxy_acc = 0.0;
      for (const auto& p : points)
        if (p.index == proxy.best.index) proxy_acc = p.accuracy;
      band.proxy = {proxy.best.index, proxy.best.arch, proxy.best.cost, proxy_acc};
      band.gap = band.truth.objective - proxy_acc;
      if (proxy.all_sentinel) {
        band.flagged = true;
        band.note = "only sentinel proxy scores in this budget band";
      }
    } catch (const Error& e) {
      band.feasible = false;
      band.flagged = true;
      band.note = e.what();
    }
    cmp.bands.push_back(std::move(band));
  }
  return cmp;
}

// ---------------------------------------------------------------------------
// evolutionary search

struct EvoConfig {
  int population = 64;
  int tournament = 10;
  int max_steps = 10000;
  std::uint64_t seed = 0;
  int feasible_retries = 1000;

  void validate() const {
    if (tournament < 2) throw Error("evo config: tournament size must be >= 2");
    if (population < tournament)
      throw Error("evo config: population must be >= tournament size");
    if (max_steps < 0) throw Error("evo config: max_steps must be >= 0");
    if (feasible_retries < 1) throw Error("evo config: feasible_retries must be >= 1");
  }
};

struct EvoStep {
  int step = 0;  // 0 = after initialization
  double best_score = 0.0;
  std::int64_t best_index = 0;
};

struct EvoResult {
  CellSpec best;
  std::int64_t best_index = 0;
  double best_score = 0.0;
  std::vector<EvoStep> trajectory;  // best-ever per step, monotone non-decreasing
  std::int64_t evaluations = 0;
};

// Objective, oriented so that higher is better; NaN marks a sentinel outcome
// ranked below every number.
using EvoScoreFn = std::function<double(const CellSpec&, std::int64_t)>;
using EvoFeasibleFn = std::function<bool(const CellSpec&, std::int64_t)>;

// Tournament selection with single-edge mutation and replace-oldest updates.
// Infeasible offspring are rejected and resampled up to the retry bound.
inline EvoResult evolutionary_search(const EvoScoreFn& score_fn, const EvoConfig& cfg,
                                     const EvoFeasibleFn& feasible = nullptr) {
  cfg.validate();
  RngState rng(cfg.seed);
  RngState init_rng = rng.derive("evo_init");
  RngState step_rng = rng.derive("evo_steps");

  struct Member {
    CellSpec spec;
    std::int64_t index;
    double score;  // -inf for sentinel
  };
  auto oriented = [](double v) {
    return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
  };

  EvoResult result;
  result.best_score = -std::numeric_limits<double>::infinity();
  auto consider = [&](const Member& m) {
    if (m.score > result.best_score ||
        (m.score == result.best_score && m.index < result.best_index)) {
      result.best = m.spec;
      result.best_index = m.index;
      result.best_score = m.score;
    }
  };

  std::deque<Member> population;
  for (int i = 0; i < cfg.population; ++i) {
    Member m;
    bool found = false;
    for (int attempt = 0; attempt < cfg.feasible_retries; ++attempt) {
      const std::int64_t idx =
          static_cast<std::int64_t>(init_rng.next_below(static_cast<std::uint64_t>(kSpaceSize)));
      m.spec = spec_at(idx);
      m.index = idx;
      if (!feasible || feasible(m.spec, m.index)) {
        found = true;
        break;
      }
    }
    if (!found)
      throw Error("evolutionary_search: feasible-region sampling failed after " +
                  std::to_string(cfg.feasible_retries) + " retries");
    m.score = oriented(score_fn(m.spec, m.index));
    ++result.evaluations;
    consider(m);
    population.push_back(std::move(m));
  }
  result.trajectory.push_back({0, result.best_score, result.best_index});

  for (int step = 1; step <= cfg.max_steps; ++step) {
    // Tournament (sampled with replacement): best member becomes the parent.
    const Member* parent = nullptr;
    for (int t = 0; t < cfg.tournament; ++t) {
      const auto& m =
          population[step_rng.next_below(static_cast<std::uint64_t>(population.size()))];
      if (!parent || m.score > parent->score ||
          (m.score == parent->score && m.index < parent->index))
        parent = &m;
    }
    Member child;
    bool found = false;
    for (int attempt = 0; attempt < cfg.feasible_retries; ++attempt) {
      child.spec = parent->spec;
      const auto edge = step_rng.next_below(kCellEdges);
      const auto op = step_rng.next_below(kNumOpKinds);
      child.spec.ops[static_cast<std::size_t>(edge)] = static_cast<OpKind>(op);
      child.index = spec_index(child.spec);
      if (!feasible || feasible(child.spec, child.index)) {
        found = true;
        break;
      }
    }
    if (!found)
      throw Error("evolutionary_search: feasible-region sampling failed after " +
                  std::to_string(cfg.feasible_retries) + " retries (step " +
                  std::to_string(step) + ")");
    child.score = oriented(score_fn(child.spec, child.index));
    ++result.evaluations;
    consider(child);
    population.pop_front();
    population.push_back(std::move(child));
    result.trajectory.push_back({step, result.best_score, result.best_index});
  }
  return result;
}

// ---------------------------------------------------------------------------
// serialization

inline std::string evo_fingerprint(const EvoConfig& cfg, std::string_view objective) {
  std::string text = "pop=" + std::to_string(cfg.population) +
                     ";tour=" + std::to_string(cfg.tournament) +
                     ";steps=" + std::to_string(cfg.max_steps) +
                     ";seed=" + std::to_string(cfg.seed) + ";obj=" + std::string(objective);
  return hex64(fnv1a64(text));
}

// The population/tournament/mutation settings are conventions, so they ride
// along in the metadata of every serialized result.
inline nlohmann::json evo_result_to_json(const EvoResult& r, const EvoConfig& cfg,
                                         std::string_view objective) {
  nlohmann::json j;
  j["objective"] = std::string(objective);
  j["fingerprint"] = evo_fingerprint(cfg, objective);
  j["config"] = {{"population", cfg.population},
                 {"tournament", cfg.tournament},
                 {"max_steps", cfg.max_steps},
                 {"seed", cfg.seed},
                 {"mutation", "resample one uniformly chosen edge"},
                 {"update", "replace oldest"}};
  j["best"] = {{"arch", serialize_arch(r.best)},
               {"arch_index", r.best_index},
               {"score", r.best_score}};
  j["evaluations"] = r.evaluations;
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : r.trajectory)
    steps.push_back({{"step", s.step}, {"best_score", s.best_score},
                     {"best_index", s.best_index}});
  j["trajectory"] = steps;
  return j;
}

inline std::string evo_trajectory_csv(const EvoResult& r, const EvoConfig& cfg,
                                      std::string_view objective) {
  std::string out = "# fingerprint " + evo_fingerprint(cfg, objective) + "\n";
  out += "step,best_score,best_index\n";
  char buf[64];
  for (const auto& s : r.trajectory) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%lld\n", s.step, s.best_score,
                  static_cast<long long>(s.best_index));
    out += buf;
  }
  return out;
}

inline nlohmann::json pareto_result_to_json(const ParetoResult& r) {
  nlohmann::json j;
  j["objective"] = r.objective_desc;
  j["metric"] = r.metric;
  nlohmann::json front = nlohmann::json::array();
  for (const auto& p : r.front)
    front.push_back({{"arch", p.arch}, {"arch_index", p.index}, {"cost", p.cost},
                     {"objective", p.objective}});
  j["front"] = front;
  return j;
}

}  // namespace zeronas
