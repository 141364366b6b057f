#pragma once

// Cell-based search space: a complete DAG over 4 ordered nodes whose 6 edges
// each carry one of 5 operations. Arch strings follow the
// `|op~0|+|op~0|op~1|+|op~0|op~1|op~2|` convention.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "zeronas/common.hpp"

namespace zeronas {

enum class OpKind : std::uint8_t {
  none = 0,
  skip_connect = 1,
  conv_1x1 = 2,
  conv_3x3 = 3,
  avg_pool_3x3 = 4,
};

constexpr int kNumOpKinds = 5;
constexpr int kCellNodes = 4;
constexpr int kCellEdges = 6;

inline std::string_view op_name(OpKind op) {
  switch (op) {
    case OpKind::none: return "none";
    case OpKind::skip_connect: return "skip_connect";
    case OpKind::conv_1x1: return "conv_1x1";
    case OpKind::conv_3x3: return "conv_3x3";
    case OpKind::avg_pool_3x3: return "avg_pool_3x3";
  }
  throw Error("invalid OpKind value");
}

inline bool op_from_name(std::string_view name, OpKind& out) {
  for (int i = 0; i < kNumOpKinds; ++i) {
    const auto op = static_cast<OpKind>(i);
    if (op_name(op) == name) {
      out = op;
      return true;
    }
  }
  return false;
}

// Edge order: (target, source) pairs with source < target, grouped by target:
// (1,0), (2,0), (2,1), (3,0), (3,1), (3,2).
struct CellEdge {
  int target;
  int source;
};

constexpr std::array<CellEdge, kCellEdges> kEdgeIndex = {{
    {1, 0}, {2, 0}, {2, 1}, {3, 0}, {3, 1}, {3, 2},
}};

struct CellSpec {
  std::array<OpKind, kCellEdges> ops{};

  bool operator==(const CellSpec&) const = default;

  OpKind op(int target, int source) const {
    for (int e = 0; e < kCellEdges; ++e)
      if (kEdgeIndex[static_cast<std::size_t>(e)].target == target &&
          kEdgeIndex[static_cast<std::size_t>(e)].source == source)
        return ops[static_cast<std::size_t>(e)];
    throw Error("no cell edge (" + std::to_string(target) + ", " + std::to_string(source) + ")");
  }

  int count(OpKind kind) const {
    int n = 0;
    for (OpKind op : ops)
      if (op == kind) ++n;
    return n;
  }
};

inline std::string serialize_arch(const CellSpec& spec) {
  std::string out;
  int e = 0;
  for (int target = 1; target < kCellNodes; ++target) {
    out += '|';
    for (int source = 0; source < target; ++source) {
      out += op_name(spec.ops[static_cast<std::size_t>(e++)]);
      out += '~';
      out += static_cast<char>('0' + source);
      out += '|';
    }
    if (target != kCellNodes - 1) out += '+';
  }
  return out;
}

inline CellSpec parse_arch(std::string_view text) {
  CellSpec spec;
  std::size_t pos = 0;
  int edge = 0;
  auto expect = [&](char c) {
    if (pos >= text.size() || text[pos] != c)
      throw ParseError(std::string("expected '") + c + "' in arch string", pos);
    ++pos;
  };
  for (int target = 1; target < kCellNodes; ++target) {
    expect('|');
    for (int source = 0; source < target; ++source) {
      const std::size_t start = pos;
      while (pos < text.size() && text[pos] != '~') ++pos;
      if (pos >= text.size()) throw ParseError("expected '~' after op name", pos);
      std::string_view name = text.substr(start, pos - start);
      OpKind op;
      if (!op_from_name(name, op))
        throw ParseError("unknown op name '" + std::string(name) + "'", start);
      ++pos;  // consume '~'
      if (pos >= text.size() || text[pos] != static_cast<char>('0' + source))
        throw ParseError("expected source index " + std::to_string(source), pos);
      ++pos;
      expect('|');
      spec.ops[static_cast<std::size_t>(edge++)] = op;
    }
    if (target != kCellNodes - 1) expect('+');
  }
  if (pos != text.size()) throw ParseError("trailing characters after arch string", pos);
  return spec;
}

constexpr std::int64_t kSpaceSize = 15625;  // 5^6

// Spec at position `index` in the canonical enumeration: lexicographic over
// (edge 0, ..., edge 5) with op order none < skip_connect < conv_1x1 <
// conv_3x3 < avg_pool_3x3. Edge 0 is the most significant digit.
inline CellSpec spec_at(std::int64_t index) {
  if (index < 0 || index >= kSpaceSize)
    throw Error("architecture index " + std::to_string(index) + " outside [0, " +
                std::to_string(kSpaceSize) + ")");
  CellSpec spec;
  for (int e = kCellEdges - 1; e >= 0; --e) {
    spec.ops[static_cast<std::size_t>(e)] = static_cast<OpKind>(index % kNumOpKinds);
    index /= kNumOpKinds;
  }
  return spec;
}

inline std::int64_t spec_index(const CellSpec& spec) {
  std::int64_t idx = 0;
  for (int e = 0; e < kCellEdges; ++e)
    idx = idx * kNumOpKinds + static_cast<std::int64_t>(spec.ops[static_cast<std::size_t>(e)]);
  return idx;
}

inline std::vector<CellSpec> enumerate_space() {
  std::vector<CellSpec> all;
  all.reserve(static_cast<std::size_t>(kSpaceSize));
  for (std::int64_t i = 0; i < kSpaceSize; ++i) all.push_back(spec_at(i));
  return all;
}

}  // namespace zeronas
