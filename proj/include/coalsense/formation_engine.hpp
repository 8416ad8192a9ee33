#pragma once

// Partition state, coalition-head election and merge-and-split coalition
// formation with stability checks.

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coalsense/coalition_game.hpp"
#include "coalsense/extended_real.hpp"
#include "coalsense/sensing_math.hpp"
#include "coalsense/set_partition.hpp"

namespace coalsense {

/// Sorted, duplicate-free SU ids.
using Members = std::vector<NodeId>;

struct Coalition {
  Members members;
  NodeId head = 0;
  CoalitionValue cached;

  std::size_t size() const { return members.size(); }
  NodeId min_id() const { return members.front(); }
};

/// Binds a network to the game parameters and caches the per-SU quantities
/// every coalition evaluation needs (P_f and each SU's own P_m).
class GameContext {
 public:
  GameContext(Network network, GameParams game) : network_(std::move(network)), game_(game) {
    network_.validate();
    game_.validate();
    pf_ = false_alarm_probability(network_.params.lambda, network_.params.m);
    missing_.reserve(network_.size());
    for (const auto& p : network_.sus) {
      const double d = distance(p, network_.pu);
      // an SU sitting on the PU sees unbounded SNR
      missing_.push_back(d > 0.0 ? missing_probability(avg_snr(network_.params.pu_power, d, network_.params),
                                                       network_.params.lambda, network_.params.m)
                                 : 0.0);
    }
  }

  const Network& network() const { return network_; }
  const GameParams& game() const { return game_; }
  std::size_t size() const { return network_.size(); }
  double pf() const { return pf_; }

  double missing(NodeId id) const {
    check_id(id);
    return missing_[static_cast<std::size_t>(id - 1)];
  }

  double report_error(NodeId member, NodeId head) const {
    if (member == head) return 0.0;
    const double d = distance(network_.position(member), network_.position(head));
    if (d == 0.0) return 0.0;
    return reporting_error_probability(avg_snr(network_.params.su_report_power, d, network_.params));
  }

  /// Lowest non-cooperative P_m, ties to the lowest id.
  NodeId select_head(std::span<const NodeId> members) const {
    if (members.empty()) throw std::domain_error("select_head: empty coalition");
    NodeId best = members.front();
    for (NodeId id : members) {
      const double pm = missing(id);
      const double best_pm = missing(best);
      if (pm < best_pm || (pm == best_pm && id < best)) best = id;
    }
    return best;
  }

  Coalition evaluate(Members members) const {
    if (members.empty()) throw std::domain_error("evaluate_coalition: empty coalition");
    std::sort(members.begin(), members.end());
    if (std::adjacent_find(members.begin(), members.end()) != members.end())
      throw std::domain_error("evaluate_coalition: duplicate member");
    for (NodeId id : members) check_id(id);

    const NodeId head = select_head(members);
    std::vector<double> pm;
    std::vector<double> pe;
    pm.reserve(members.size());
    pe.reserve(members.size());
    for (NodeId id : members) {
      pm.push_back(missing(id));
      pe.push_back(report_error(id, head));
    }
    const double qm = coalition_missing_probability(pm, pe);
    const double qf = coalition_false_alarm_probability(pf_, pe);
    return Coalition{std::move(members), head, coalition_value(qm, qf, game_.alpha)};
  }

  Position centroid(const Members& members) const {
    Position c;
    for (NodeId id : members) {
      const auto& p = network_.position(id);
      c.x += p.x;
      c.y += p.y;
    }
    c.x /= static_cast<double>(members.size());
    c.y /= static_cast<double>(members.size());
    return c;
  }

 private:
  void check_id(NodeId id) const {
    if (id < 1 || static_cast<std::size_t>(id) > network_.size())
      throw std::out_of_range("unknown SU id " + std::to_string(id));
  }

  Network network_;
  GameParams game_;
  double pf_ = 0.0;
  std::vector<double> missing_;
};

inline NodeId select_head(const Members& members, const Network& network) {
  return GameContext(network, GameParams{}).select_head(members);
}

inline Coalition evaluate_coalition(const Members& members, const Network& network, const GameParams& game) {
  return GameContext(network, game).evaluate(members);
}

inline std::string format_members(const Members& m) {
  std::string out = "[";
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(m[i]);
  }
  return out + "]";
}

/// Disjoint coalitions covering every SU.
struct Partition {
  std::vector<Coalition> coalitions;

  std::size_t size() const { return coalitions.size(); }

  /// Orders coalitions by their lowest member id.
  void normalize() {
    std::sort(coalitions.begin(), coalitions.end(),
              [](const Coalition& a, const Coalition& b) { return a.min_id() < b.min_id(); });
  }

  std::vector<Members> structure() const {
    std::vector<Members> out;
    for (const auto& c : coalitions) out.push_back(c.members);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Throws std::logic_error unless the coalitions partition {1..n}.
  void validate(std::size_t n) const {
    std::vector<char> seen(n + 1, 0);
    std::size_t count = 0;
    for (const auto& c : coalitions) {
      if (c.members.empty()) throw std::logic_error("partition: empty coalition");
      if (std::find(c.members.begin(), c.members.end(), c.head) == c.members.end())
        throw std::logic_error("partition: head outside its coalition");
      for (NodeId id : c.members) {
        if (id < 1 || static_cast<std::size_t>(id) > n) throw std::logic_error("partition: unknown id");
        if (seen[static_cast<std::size_t>(id)]) throw std::logic_error("partition: overlapping coalitions");
        seen[static_cast<std::size_t>(id)] = 1;
        ++count;
      }
    }
    if (count != n) throw std::logic_error("partition: does not cover every SU");
  }

  const Coalition& coalition_of(NodeId id) const {
    for (const auto& c : coalitions)
      if (std::binary_search(c.members.begin(), c.members.end(), id)) return c;
    throw std::out_of_range("partition: id not present");
  }

  /// phi_i = v(S) for every player; values are never divided.
  UtilityMap utilities() const {
    UtilityMap out;
    for (const auto& c : coalitions)
      for (NodeId id : c.members) out.emplace(id, c.cached.value);
    return out;
  }

  /// One line per coalition: `head:member,member,...`.
  std::string snapshot() const {
    std::string out;
    for (const auto& c : coalitions) {
      out += std::to_string(c.head) + ':';
      for (std::size_t i = 0; i < c.members.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(c.members[i]);
      }
      out += '\n';
    }
    return out;
  }
};

inline Partition make_partition(const std::vector<Members>& blocks, const GameContext& ctx) {
  Partition p;
  for (const auto& b : blocks) p.coalitions.push_back(ctx.evaluate(b));
  p.normalize();
  p.validate(ctx.size());
  return p;
}

inline Partition singletons(const GameContext& ctx) {
  std::vector<Members> blocks;
  for (std::size_t i = 1; i <= ctx.size(); ++i) blocks.push_back({static_cast<NodeId>(i)});
  return make_partition(blocks, ctx);
}

/// Re-evaluates every coalition (head election included) under `ctx`.
inline Partition reevaluate(const Partition& p, const GameContext& ctx) {
  return make_partition(p.structure(), ctx);
}

enum class EventKind { Merge, Split };

struct FormationEvent {
  EventKind kind = EventKind::Merge;
  std::vector<Members> from;
  std::vector<Members> to;

  /// `MERGE [1,2]|[3] -> [1,2,3]` or `SPLIT [1,2,3] -> [1,2]|[3]`.
  std::string to_string() const {
    auto join = [](const std::vector<Members>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += '|';
        s += format_members(v[i]);
      }
      return s;
    };
    return std::string(kind == EventKind::Merge ? "MERGE " : "SPLIT ") + join(from) + " -> " + join(to);
  }

  static FormationEvent parse(std::string_view line) {
    auto fail = [&] { return std::invalid_argument("malformed trace line: " + std::string(line)); };
    FormationEvent ev;
    if (line.starts_with("MERGE "))
      ev.kind = EventKind::Merge;
    else if (line.starts_with("SPLIT "))
      ev.kind = EventKind::Split;
    else
      throw fail();
    line.remove_prefix(6);
    const auto arrow = line.find(" -> ");
    if (arrow == std::string_view::npos) throw fail();
    auto parse_side = [&](std::string_view side) {
      std::vector<Members> out;
      while (!side.empty()) {
        if (side.front() != '[') throw fail();
        const auto close = side.find(']');
        if (close == std::string_view::npos) throw fail();
        Members m;
        std::string body(side.substr(1, close - 1));
        std::stringstream ss(body);
        std::string tok;
        while (std::getline(ss, tok, ',')) m.push_back(std::stoi(tok));
        if (m.empty()) throw fail();
        out.push_back(std::move(m));
        side.remove_prefix(close + 1);
        if (!side.empty()) {
          if (side.front() != '|') throw fail();
          side.remove_prefix(1);
        }
      }
      return out;
    };
    ev.from = parse_side(line.substr(0, arrow));
    ev.to = parse_side(line.substr(arrow + 4));
    return ev;
  }
};

struct FormationTrace {
  std::vector<FormationEvent> events;
  std::size_t iterations = 0;
  bool terminated = false;

  std::string to_log() const {
    std::string out;
    for (const auto& e : events) out += e.to_string() + '\n';
    return out;
  }
};

/// Applies recorded events to `initial`. Throws if an event refers to a
/// coalition that is not present.
inline Partition replay(const Partition& initial, const std::vector<FormationEvent>& events, const GameContext& ctx) {
  std::vector<Members> blocks = initial.structure();
  for (const auto& ev : events) {
    for (const auto& f : ev.from) {
      auto it = std::find(blocks.begin(), blocks.end(), f);
      if (it == blocks.end()) throw std::logic_error("replay: missing coalition " + format_members(f));
      blocks.erase(it);
    }
    for (const auto& t : ev.to) blocks.push_back(t);
  }
  return make_partition(blocks, ctx);
}

enum class SplitSearch {
  TwoBlock,       // 2^{|S|-1} - 1 candidates, iterated to a fixpoint
  AllPartitions,  // every set partition of the coalition (Bell(|S|) - 1)
};

struct FormationOptions {
  SplitSearch split_search = SplitSearch::TwoBlock;
  /// Event budget for merge_split_until_stable; 0 selects 10 * N^2 + 10.
  std::size_t max_events = 0;
};

inline constexpr std::size_t kMaxTwoBlockSplitMembers = 24;
inline constexpr std::size_t kMaxFullSplitMembers = 12;

/// First Pareto-preferred split of `c`, or nullopt. Two-block candidates are
/// taken in ascending bitmask order over the members after the lowest id;
/// full enumeration follows restricted-growth-string order.
inline std::optional<std::vector<Coalition>> find_preferred_split(const Coalition& c, const GameContext& ctx,
                                                                   SplitSearch mode = SplitSearch::TwoBlock) {
  const std::size_t k = c.size();
  if (k < 2) return std::nullopt;
  const ExtendedReal whole = c.cached.value;

  if (mode == SplitSearch::TwoBlock) {
    if (k > kMaxTwoBlockSplitMembers) throw CapacityError("split search: coalition too large");
    const std::uint64_t limit = std::uint64_t{1} << (k - 1);
    for (std::uint64_t mask = 1; mask < limit; ++mask) {
      Members a{c.members[0]};
      Members b;
      for (std::size_t i = 1; i < k; ++i) ((mask >> (i - 1)) & 1u ? b : a).push_back(c.members[i]);
      Coalition ca = ctx.evaluate(std::move(a));
      Coalition cb = ctx.evaluate(std::move(b));
      const ExtendedReal parts[] = {ca.cached.value, cb.cached.value};
      if (split_preferred(parts, whole)) return std::vector<Coalition>{std::move(ca), std::move(cb)};
    }
    return std::nullopt;
  }

  if (k > kMaxFullSplitMembers) throw CapacityError("full split search: coalition too large");
  RgsEnumerator rgs(k);
  while (rgs.next()) {
    std::vector<Members> blocks(static_cast<std::size_t>(rgs.block_count()));
    for (std::size_t i = 0; i < k; ++i) blocks[static_cast<std::size_t>(rgs.labels()[i])].push_back(c.members[i]);
    std::vector<Coalition> parts;
    std::vector<ExtendedReal> values;
    for (auto& b : blocks) {
      parts.push_back(ctx.evaluate(std::move(b)));
      values.push_back(parts.back().cached.value);
    }
    if (split_preferred(values, whole)) return parts;
  }
  return std::nullopt;
}

struct PassResult {
  Partition partition;
  std::vector<FormationEvent> events;
};

/// One merge pass. Coalitions act in descending value (ties: lowest member
/// id). The acting coalition tries partners by ascending centroid distance
/// and merges with the first one for which the union is Pareto-preferred; a
/// freshly merged coalition keeps searching from its new centroid. Each
/// coalition gets one turn per pass, but may still be absorbed as a partner
/// after its turn.
inline PassResult merge_pass(const Partition& partition, const GameContext& ctx) {
  struct Slot {
    Coalition c;
    bool alive = true;
    bool decided = false;
  };
  std::vector<Slot> slots;
  for (const auto& c : partition.coalitions) slots.push_back({c});

  std::vector<std::size_t> order(slots.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ca = slots[a].c;
    const auto& cb = slots[b].c;
    if (ca.cached.value != cb.cached.value) return ca.cached.value > cb.cached.value;
    return ca.min_id() < cb.min_id();
  });

  std::vector<FormationEvent> events;
  for (std::size_t actor : order) {
    if (!slots[actor].alive || slots[actor].decided) continue;
    bool merged = true;
    while (merged) {
      merged = false;
      const Position here = ctx.centroid(slots[actor].c.members);
      std::vector<std::pair<double, std::size_t>> candidates;
      for (std::size_t j = 0; j < slots.size(); ++j) {
        if (j == actor || !slots[j].alive) continue;
        candidates.emplace_back(distance(here, ctx.centroid(slots[j].c.members)), j);
      }
      std::sort(candidates.begin(), candidates.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return slots[a.second].c.min_id() < slots[b.second].c.min_id();
      });
      for (const auto& [dist, j] : candidates) {
        Members joined = slots[actor].c.members;
        joined.insert(joined.end(), slots[j].c.members.begin(), slots[j].c.members.end());
        Coalition u = ctx.evaluate(std::move(joined));
        const ExtendedReal parts[] = {slots[actor].c.cached.value, slots[j].c.cached.value};
        if (!merge_preferred(u.cached.value, parts)) continue;
        events.push_back({EventKind::Merge, {slots[actor].c.members, slots[j].c.members}, {u.members}});
        slots[actor].c = std::move(u);
        slots[j].alive = false;
        merged = true;
        break;
      }
    }
    slots[actor].decided = true;
  }

  PassResult out;
  for (auto& s : slots)
    if (s.alive) out.partition.coalitions.push_back(std::move(s.c));
  out.partition.normalize();
  out.events = std::move(events);
  return out;
}

/// Splits every coalition that has a Pareto-preferred split, re-examining
/// the resulting blocks until none can split further.
inline PassResult split_pass(const Partition& partition, const GameContext& ctx,
                             SplitSearch mode = SplitSearch::TwoBlock) {
  std::vector<Coalition> work(partition.coalitions.rbegin(), partition.coalitions.rend());
  PassResult out;
  while (!work.empty()) {
    Coalition c = std::move(work.back());
    work.pop_back();
    auto split = find_preferred_split(c, ctx, mode);
    if (!split) {
      out.partition.coalitions.push_back(std::move(c));
      continue;
    }
    FormationEvent ev{EventKind::Split, {c.members}, {}};
    for (const auto& part : *split) ev.to.push_back(part.members);
    out.events.push_back(std::move(ev));
    for (auto it = split->rbegin(); it != split->rend(); ++it) work.push_back(std::move(*it));
  }
  out.partition.normalize();
  return out;
}

/// Alternates merge and split passes until neither changes the partition.
/// Every accepted event is a strict Pareto improvement, so the loop
/// terminates; exceeding the event budget means the order is broken and is
/// reported as std::logic_error.
inline std::pair<Partition, FormationTrace> merge_split_until_stable(const Partition& partition,
                                                                     const GameContext& ctx,
                                                                     const FormationOptions& options = {}) {
  const std::size_t n = ctx.size();
  const std::size_t budget = options.max_events ? options.max_events : 10 * n * n + 10;

  Partition current = reevaluate(partition, ctx);
  FormationTrace trace;
  while (true) {
    auto merged = merge_pass(current, ctx);
    auto split = split_pass(merged.partition, ctx, options.split_search);
    ++trace.iterations;
    const bool changed = !merged.events.empty() || !split.events.empty();
    for (auto& e : merged.events) trace.events.push_back(std::move(e));
    for (auto& e : split.events) trace.events.push_back(std::move(e));
    if (trace.events.size() > budget)
      throw std::logic_error("merge_split_until_stable: event budget exceeded");
    current = std::move(split.partition);
    if (!changed) break;
  }
  trace.terminated = true;
  return {std::move(current), std::move(trace)};
}

/// No pairwise merge and no split of any coalition is Pareto-preferred.
inline bool is_dhp_stable(const Partition& partition, const GameContext& ctx,
                          SplitSearch mode = SplitSearch::TwoBlock) {
  const Partition p = reevaluate(partition, ctx);
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = i + 1; j < p.size(); ++j) {
      Members joined = p.coalitions[i].members;
      joined.insert(joined.end(), p.coalitions[j].members.begin(), p.coalitions[j].members.end());
      const ExtendedReal parts[] = {p.coalitions[i].cached.value, p.coalitions[j].cached.value};
      if (merge_preferred(ctx.evaluate(std::move(joined)).cached.value, parts)) return false;
    }
  }
  for (const auto& c : p.coalitions)
    if (find_preferred_split(c, ctx, mode)) return false;
  return true;
}

// --- exhaustive D_c machinery -------------------------------------------

using Mask = std::uint32_t;

inline Mask to_mask(const Members& m) {
  Mask out = 0;
  for (NodeId id : m) out |= Mask{1} << (id - 1);
  return out;
}

inline Members from_mask(Mask mask) {
  Members out;
  for (int i = 0; mask; ++i, mask >>= 1)
    if (mask & 1u) out.push_back(i + 1);
  return out;
}

/// Values of every non-empty coalition of a small network, indexed by
/// member bitmask (bit i is SU i+1).
class SubsetTable {
 public:
  explicit SubsetTable(const GameContext& ctx, std::size_t capacity = 14) : players_(ctx.size()) {
    if (players_ > capacity || players_ > 20) throw CapacityError("subset table: too many SUs");
    values_.resize(std::size_t{1} << players_);
    for (Mask m = 1; m < values_.size(); ++m) values_[m] = ctx.evaluate(from_mask(m)).cached;
  }

  std::size_t players() const { return players_; }
  Mask full() const { return static_cast<Mask>((std::size_t{1} << players_) - 1); }
  const CoalitionValue& operator[](Mask m) const { return values_[m]; }

 private:
  std::size_t players_;
  std::vector<CoalitionValue> values_;
};

struct DcReport {
  bool stable = true;
  std::string witness;  // empty when stable
};

inline constexpr std::size_t kMaxDcPlayers = 12;

namespace detail {

inline std::string mask_str(Mask m) { return format_members(from_mask(m)); }

inline DcReport dc_conditions(const std::vector<Mask>& blocks, const SubsetTable& table) {
  // (1) inside every block, any two disjoint sub-coalitions prefer to merge
  for (Mask t : blocks) {
    for (Mask sub = t; sub; sub = (sub - 1) & t) {
      if (std::popcount(sub) < 2) continue;
      const Mask low = sub & (~sub + 1);
      const Mask rest = sub ^ low;
      // S1 holds the lowest member; S2 = sub \ S1 must be non-empty
      for (Mask extra = rest;; extra = (extra - 1) & rest) {
        const Mask s1 = low | extra;
        const Mask s2 = sub ^ s1;
        if (s2) {
          const ExtendedReal parts[] = {table[s1].value, table[s2].value};
          if (!merge_preferred(table[sub].value, parts))
            return {false, "condition 1: " + mask_str(s1) + "|" + mask_str(s2) + " inside " + mask_str(t)};
        }
        if (!extra) break;
      }
    }
  }
  // (2) every coalition straddling blocks prefers its projection on the partition
  for (Mask g = 1; g <= table.full(); ++g) {
    bool compatible = false;
    for (Mask t : blocks)
      if ((g & ~t) == 0) compatible = true;
    if (compatible) continue;
    std::vector<ExtendedReal> parts;
    for (Mask t : blocks)
      if (g & t) parts.push_back(table[g & t].value);
    if (!split_preferred(parts, table[g].value))
      return {false, "condition 2: " + mask_str(g) + " does not prefer its projection"};
  }
  return {};
}

}  // namespace detail

/// Checks the two necessary and sufficient conditions for `partition` to be
/// D_c-stable by enumeration. Limited to kMaxDcPlayers SUs.
inline DcReport check_dc_conditions(const Partition& partition, const GameContext& ctx) {
  if (ctx.size() > kMaxDcPlayers) throw CapacityError("check_dc_conditions: too many SUs");
  partition.validate(ctx.size());
  const SubsetTable table(ctx, kMaxDcPlayers);
  std::vector<Mask> blocks;
  for (const auto& c : partition.coalitions) blocks.push_back(to_mask(c.members));
  return detail::dc_conditions(blocks, table);
}

}  // namespace coalsense
