#pragma once

// Exact centralized benchmark: minimise the per-SU average missing
// probability over every partition, subject to Q_f <= alpha per coalition.

#include <bit>
#include <cstddef>
#include <iostream>
#include <optional>
#include <vector>

#include "coalsense/formation_engine.hpp"
#include "coalsense/set_partition.hpp"

namespace coalsense {

inline constexpr std::size_t kCentralizedCapacity = 12;
inline constexpr std::size_t kCentralizedExtendedCapacity = 14;

/// Checked entry point for set-partition enumeration of {1..n}. Sizes above
/// 12 need `allow_extended` (up to 14) and print a warning.
inline RgsEnumerator enumerate_partitions(std::size_t n, bool allow_extended = false) {
  if (n < 1) throw std::invalid_argument("enumerate_partitions: n must be >= 1");
  if (n > kCentralizedCapacity) {
    if (!allow_extended || n > kCentralizedExtendedCapacity)
      throw CapacityError("enumerate_partitions: n=" + std::to_string(n) + " exceeds capacity");
    std::cerr << "warning: enumerating Bell(" << n << ") = " << bell_number(n) << " partitions\n";
  }
  return RgsEnumerator(n);
}

struct CentralizedSolution {
  Partition partition;
  double avg_missing = 1.0;
  double avg_false_alarm = 0.0;
  bool feasible = false;
};

inline double weighted_average_missing(const Partition& p, std::size_t n) {
  double sum = 0.0;
  for (const auto& c : p.coalitions) sum += static_cast<double>(c.size()) * c.cached.qm;
  return sum / static_cast<double>(n);
}

inline double weighted_average_false_alarm(const Partition& p, std::size_t n) {
  double sum = 0.0;
  for (const auto& c : p.coalitions) sum += static_cast<double>(c.size()) * c.cached.qf;
  return sum / static_cast<double>(n);
}

/// Exhaustive search. Ties on the objective go to fewer coalitions, then to
/// the earlier partition in enumeration order.
inline CentralizedSolution optimal_partition(const GameContext& ctx, std::size_t capacity = kCentralizedCapacity) {
  const std::size_t n = ctx.size();
  const bool extended = capacity > kCentralizedCapacity;
  if (capacity > kCentralizedExtendedCapacity) throw CapacityError("optimal_partition: capacity above 14");
  if (n > capacity) throw CapacityError("optimal_partition: N=" + std::to_string(n) + " exceeds capacity");

  const SubsetTable table(ctx, kCentralizedExtendedCapacity);
  const double alpha = ctx.game().alpha;
  std::vector<double> weighted(std::size_t{1} << n, 0.0);
  std::vector<char> feasible(weighted.size(), 0);
  for (Mask m = 1; m < weighted.size(); ++m) {
    weighted[m] = static_cast<double>(std::popcount(m)) * table[m].qm;
    feasible[m] = table[m].qf <= alpha;
  }

  RgsEnumerator rgs = enumerate_partitions(n, extended);
  std::vector<Mask> masks(n);
  std::vector<Mask> best_masks;
  double best = 0.0;
  int best_blocks = 0;
  do {
    const int blocks = rgs.block_count();
    std::fill(masks.begin(), masks.begin() + blocks, 0u);
    const auto labels = rgs.labels();
    for (std::size_t i = 0; i < n; ++i) masks[static_cast<std::size_t>(labels[i])] |= Mask{1} << i;
    bool ok = true;
    double sum = 0.0;
    for (int b = 0; b < blocks && ok; ++b) {
      ok = feasible[masks[b]];
      sum += weighted[masks[b]];
    }
    if (!ok) continue;
    const double objective = sum / static_cast<double>(n);
    if (best_masks.empty() || objective < best || (objective == best && blocks < best_blocks)) {
      best = objective;
      best_blocks = blocks;
      best_masks.assign(masks.begin(), masks.begin() + blocks);
    }
  } while (rgs.next());

  CentralizedSolution sol;
  if (best_masks.empty()) {
    sol.partition = singletons(ctx);
    sol.feasible = false;
  } else {
    std::vector<Members> blocks;
    for (Mask m : best_masks) blocks.push_back(from_mask(m));
    sol.partition = make_partition(blocks, ctx);
    sol.feasible = true;
  }
  sol.avg_missing = weighted_average_missing(sol.partition, n);
  sol.avg_false_alarm = weighted_average_false_alarm(sol.partition, n);
  return sol;
}

/// Searches every partition for one meeting the D_c conditions. When it
/// exists it is unique, so the first hit is returned.
inline std::optional<Partition> find_dc_stable_partition(const GameContext& ctx) {
  const std::size_t n = ctx.size();
  if (n > kMaxDcPlayers) throw CapacityError("find_dc_stable_partition: too many SUs");
  const SubsetTable table(ctx, kMaxDcPlayers);
  RgsEnumerator rgs(n);
  do {
    const auto masks = rgs.block_masks();
    if (detail::dc_conditions(masks, table).stable) {
      std::vector<Members> blocks;
      for (Mask m : masks) blocks.push_back(from_mask(m));
      return make_partition(blocks, ctx);
    }
  } while (rgs.next());
  return std::nullopt;
}

}  // namespace coalsense
