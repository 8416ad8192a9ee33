#include <gtest/gtest.h>

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "coalsense/centralized_oracle.hpp"
#include "support.hpp"

using namespace coalsense;
using coalsense::testing::network_at;
using coalsense::testing::random_network;

namespace {

const GameParams kGame{0.1};

// B(n+1) = sum_k C(n,k) B(k)
std::vector<std::uint64_t> bell_by_binomials(std::size_t upto) {
  std::vector<std::uint64_t> b{1};
  for (std::size_t n = 0; n < upto; ++n) {
    std::uint64_t c = 1, sum = 0;
    for (std::size_t k = 0; k <= n; ++k) {
      sum += c * b[k];
      c = c * (n - k) / (k + 1);
    }
    b.push_back(sum);
  }
  return b;
}

// Independent search: place SU i into an existing block or a new one.
double brute_force_objective(const GameContext& ctx) {
  const std::size_t n = ctx.size();
  double best = std::numeric_limits<double>::infinity();
  std::vector<Members> blocks;
  std::function<void(NodeId)> place = [&](NodeId id) {
    if (static_cast<std::size_t>(id) > n) {
      double sum = 0.0;
      for (const auto& b : blocks) {
        const auto c = ctx.evaluate(b);
        if (c.cached.qf > ctx.game().alpha) return;
        sum += static_cast<double>(b.size()) * c.cached.qm;
      }
      best = std::min(best, sum / static_cast<double>(n));
      return;
    }
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      blocks[k].push_back(id);
      place(id + 1);
      blocks[k].pop_back();
    }
    blocks.push_back({id});
    place(id + 1);
    blocks.pop_back();
  };
  place(1);
  return best;
}

}  // namespace

TEST(Enumeration, BellNumbersMatchIndependentRecurrence) {
  const auto expected = bell_by_binomials(14);
  EXPECT_EQ(expected[12], 4213597u);
  for (std::size_t n = 1; n <= 14; ++n) EXPECT_EQ(bell_number(n), expected[n]) << n;
  for (std::size_t n = 1; n <= 10; ++n) {
    RgsEnumerator rgs(n);
    std::set<std::vector<int>> seen;
    std::uint64_t count = 0;
    do {
      const auto l = rgs.labels();
      seen.insert(std::vector<int>(l.begin(), l.end()));
      ++count;
    } while (rgs.next());
    EXPECT_EQ(count, expected[n]) << n;
    EXPECT_EQ(seen.size(), count);
  }
}

TEST(Enumeration, CapacityLimits) {
  EXPECT_NO_THROW(enumerate_partitions(12));
  EXPECT_THROW(enumerate_partitions(13), CapacityError);
  EXPECT_NO_THROW(enumerate_partitions(13, true));
  EXPECT_THROW(enumerate_partitions(15, true), CapacityError);
  EXPECT_THROW(enumerate_partitions(0), std::invalid_argument);
}

TEST(OptimalPartition, SingleSu) {
  const GameContext ctx(network_at({{1200, 0}}, 0.01), kGame);
  const auto sol = optimal_partition(ctx);
  EXPECT_TRUE(sol.feasible);
  EXPECT_EQ(sol.partition.size(), 1u);
  EXPECT_DOUBLE_EQ(sol.avg_missing, ctx.missing(1));
  EXPECT_NEAR(sol.avg_false_alarm, 0.01, 1e-12);
}

TEST(OptimalPartition, CoLocatedPairMerges) {
  const GameContext ctx(network_at({{2000, 0}, {2000, 0}}, 0.01), kGame);
  const auto sol = optimal_partition(ctx);
  EXPECT_EQ(sol.partition.structure(), (std::vector<Members>{{1, 2}}));
  const double pm = ctx.missing(1);
  EXPECT_NEAR(sol.avg_missing, pm * pm, 1e-16);
  EXPECT_NEAR(sol.avg_false_alarm, 1.0 - 0.99 * 0.99, 1e-12);
}

TEST(OptimalPartition, PairStaysApartWhenFalseAlarmTooHigh) {
  const GameContext ctx(network_at({{2000, 0}, {2000, 0}}, 0.06), kGame);
  const auto sol = optimal_partition(ctx);
  EXPECT_TRUE(sol.feasible);
  EXPECT_EQ(sol.partition.size(), 2u);
}

TEST(OptimalPartition, InfeasibleEvenAlone) {
  const GameContext ctx(network_at({{2000, 0}, {100, 0}}, 0.2), kGame);
  const auto sol = optimal_partition(ctx);
  EXPECT_FALSE(sol.feasible);
  EXPECT_EQ(sol.partition.size(), 2u);
}

TEST(OptimalPartition, MatchesIndependentSearch) {
  std::mt19937_64 gen(404);
  std::uniform_int_distribution<std::size_t> nd(1, 6);
  for (int trial = 0; trial < 300; ++trial) {
    const double pf = trial % 2 ? 0.01 : 0.03;
    const GameContext ctx(random_network(gen, nd(gen), pf), kGame);
    const auto sol = optimal_partition(ctx);
    ASSERT_TRUE(sol.feasible);
    EXPECT_NEAR(sol.avg_missing, brute_force_objective(ctx), 1e-15);
  }
}

TEST(OptimalPartition, RespectsConstraintAndBeatsDistributed) {
  std::mt19937_64 gen(5150);
  for (int trial = 0; trial < 100; ++trial) {
    const GameContext ctx(random_network(gen, 8, 0.01), kGame);
    const auto sol = optimal_partition(ctx);
    ASSERT_TRUE(sol.feasible);
    for (const auto& c : sol.partition.coalitions) EXPECT_LE(c.cached.qf, 0.1);
    auto [dist, trace] = merge_split_until_stable(singletons(ctx), ctx);
    EXPECT_LE(sol.avg_missing, weighted_average_missing(dist, ctx.size()) + 1e-15);
    EXPECT_LE(sol.avg_missing, weighted_average_missing(singletons(ctx), ctx.size()) + 1e-15);
  }
}

TEST(OptimalPartition, CapacityErrors) {
  std::mt19937_64 gen(1);
  const GameContext ctx(random_network(gen, 13, 0.01), kGame);
  EXPECT_THROW(optimal_partition(ctx), CapacityError);
  EXPECT_THROW(optimal_partition(ctx, 15), CapacityError);
}

TEST(WeightedAverage, MatchesPerSuAverage) {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 50; ++trial) {
    const GameContext ctx(random_network(gen, 20, 0.005), kGame);
    auto [p, trace] = merge_split_until_stable(singletons(ctx), ctx);
    double sum = 0.0;
    for (NodeId id = 1; id <= 20; ++id) sum += p.coalition_of(id).cached.qm;
    EXPECT_NEAR(weighted_average_missing(p, 20), sum / 20.0, 1e-15);
  }
}
