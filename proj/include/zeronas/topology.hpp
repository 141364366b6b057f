#pragma once

// Topology-only proxies over per-cell structural summaries.

#include <string>
#include <vector>

#include "zeronas/common.hpp"
#include "zeronas/network.hpp"

namespace zeronas {

struct TopologyScore {
  double value = 0.0;
  std::vector<std::string> diagnostics;
};

// sum_c rho_c * w_c * d_c with rho_c = actual / possible skip connections.
// Cells with zero possible skips contribute 0 and are flagged.
inline TopologyScore nn_mass(const std::vector<CellTopology>& cells) {
  TopologyScore s;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    if (c.actual_skips > c.possible_skips)
      throw Error("nn_mass: cell " + std::to_string(i) + " has " +
                  std::to_string(c.actual_skips) + " actual skips but only " +
                  std::to_string(c.possible_skips) + " possible");
    if (c.possible_skips <= 0.0) {
      s.diagnostics.push_back("cell " + std::to_string(i) +
                              ": no possible skip connections, contributes 0");
      continue;
    }
    s.value += (c.actual_skips / c.possible_skips) * c.width * c.depth;
  }
  return s;
}

// sum_c (w_c + actual skips / total input channels).
inline TopologyScore nn_degree(const std::vector<CellTopology>& cells) {
  TopologyScore s;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    if (c.total_input_channels <= 0.0)
      throw Error("nn_degree: cell " + std::to_string(i) + " has zero total input channels");
    s.value += c.width + c.actual_skips / c.total_input_channels;
  }
  return s;
}

}  // namespace zeronas
