#pragma once

#include <string>
#include <vector>

#include "zeronas/common.hpp"

namespace zeronas {

// How channel width and resolution change between stages.
//   residual: ReLU-Conv3x3(s2)-BN -> ReLU-Conv3x3-BN main path plus an
//             AvgPool(2,2) + Conv1x1 shortcut, summed.
//   plain:    the main path only.
enum class ReductionPolicy { residual, plain };

inline std::string_view reduction_policy_name(ReductionPolicy p) {
  return p == ReductionPolicy::residual ? "residual" : "plain";
}

inline ReductionPolicy reduction_policy_from_name(std::string_view s) {
  if (s == "residual") return ReductionPolicy::residual;
  if (s == "plain") return ReductionPolicy::plain;
  throw Error("unknown reduction policy '" + std::string(s) + "'");
}

struct StageConfig {
  int cells = 5;
  int width = 16;
};

// Skeleton the cells are stacked into. The default mirrors the usual
// cell-benchmark layout at desk scale: stem of 16 channels, three stages of
// five cells at widths 16/32/64 with a reduction block between stages,
// 32x32x3 inputs, 10 classes.
struct MacroConfig {
  int stem_channels = 16;
  std::vector<StageConfig> stages = {{5, 16}, {5, 32}, {5, 64}};
  ReductionPolicy reduction = ReductionPolicy::residual;
  int input_resolution = 32;
  int input_channels = 3;
  int num_classes = 10;

  bool operator==(const MacroConfig&) const = default;

  int num_reductions() const { return static_cast<int>(stages.size()) - 1; }

  void validate() const {
    if (stem_channels < 1) throw Error("macro: stem_channels must be >= 1");
    if (stages.empty()) throw Error("macro: at least one stage required");
    for (const auto& s : stages) {
      if (s.cells < 1) throw Error("macro: cells per stage must be >= 1");
      if (s.width < 1) throw Error("macro: stage width must be >= 1");
    }
    if (input_resolution < 1) throw Error("macro: input_resolution must be >= 1");
    if (input_channels < 1) throw Error("macro: input_channels must be >= 1");
    if (num_classes < 1) throw Error("macro: num_classes must be >= 1");
    if (stages[0].width != stem_channels)
      throw Error("macro: first stage width (" + std::to_string(stages[0].width) +
                  ") must equal stem_channels (" + std::to_string(stem_channels) +
                  ") in this skeleton");
    // Every reduction needs an even input resolution for the 2x2 shortcut
    // pool, and at least 2 pixels to pool over.
    int res = input_resolution;
    for (int r = 0; r < num_reductions(); ++r) {
      if (res < 2 || res % 2 != 0)
        throw Error("macro: input resolution " + std::to_string(input_resolution) +
                    " too small for the pooling stack (" + std::to_string(num_reductions()) +
                    " reductions)");
      res /= 2;
    }
  }

  // Stable textual form used in fingerprints.
  std::string fingerprint_text() const {
    std::string s = "stem=" + std::to_string(stem_channels) + ";stages=";
    for (const auto& st : stages)
      s += std::to_string(st.cells) + "x" + std::to_string(st.width) + ",";
    s += ";red=" + std::string(reduction_policy_name(reduction));
    s += ";res=" + std::to_string(input_resolution);
    s += ";inch=" + std::to_string(input_channels);
    s += ";classes=" + std::to_string(num_classes);
    return s;
  }
};

}  // namespace zeronas
