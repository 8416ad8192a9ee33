#pragma once

// Random deployments, experiment sweeps, mobility runs and the bit-level
// Monte-Carlo check of the fusion formulas.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <initializer_list>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "coalsense/centralized_oracle.hpp"
#include "coalsense/coalition_game.hpp"
#include "coalsense/formation_engine.hpp"
#include "coalsense/sensing_math.hpp"

namespace coalsense {

// --- random streams -------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Independent stream seed for a cell identified by `keys` under `seed`.
inline std::uint64_t derive_stream_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(seed);
  for (auto k : keys) h = splitmix64(h ^ splitmix64(k + 0x632BE59BD9B4E019ull));
  return h;
}

/// mt19937_64 with portable conversions (the standard distributions are
/// implementation-defined, which would break cross-platform determinism).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 engine_;
};

// --- configuration ----------------------------------------------------------

struct ScenarioConfig {
  std::size_t n_sus = 7;
  double area_side = 3000.0;
  std::optional<Position> pu_position;  // default: centre of the square
  RadioParams radio;
  GameParams game;
  std::uint64_t seed = 1;
  std::size_t drops = 500;
  std::vector<double> pf_grid = {0.005, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.095};
  std::vector<std::size_t> n_list = {5, 10, 15, 20, 25, 30};
  std::size_t centralized_cap = kCentralizedCapacity;
  std::size_t threads = 0;  // 0: hardware concurrency

  void validate() const {
    if (n_sus < 1) throw std::invalid_argument("n_sus must be >= 1");
    if (!(area_side > 0.0) || !std::isfinite(area_side)) throw std::invalid_argument("area_side must be > 0");
    if (drops < 1) throw std::invalid_argument("drops must be >= 1");
    radio.validate();
    game.validate();
    if (pf_grid.empty()) throw std::invalid_argument("pf_grid must not be empty");
    for (double pf : pf_grid)
      if (!(pf > 0.0 && pf < game.alpha)) throw std::invalid_argument("pf_grid entries must lie in (0, alpha)");
    for (auto n : n_list)
      if (n < 1) throw std::invalid_argument("n_list entries must be >= 1");
    if (centralized_cap > kCentralizedExtendedCapacity)
      throw CapacityError("centralized_cap above " + std::to_string(kCentralizedExtendedCapacity));
    if (pu_position && !(std::isfinite(pu_position->x) && std::isfinite(pu_position->y)))
      throw std::invalid_argument("pu position must be finite");
  }

  Position pu() const { return pu_position.value_or(Position{area_side / 2.0, area_side / 2.0}); }

  std::size_t worker_count() const {
    if (threads) return threads;
    return std::max(1u, std::thread::hardware_concurrency());
  }

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

/// SU positions i.i.d. uniform over the square; deterministic in
/// (seed, n_sus, drop_index).
inline Network deploy_random(const ScenarioConfig& config, std::uint64_t drop_index) {
  Rng rng(derive_stream_seed(config.seed, {config.n_sus, drop_index}));
  Network net;
  net.pu = config.pu();
  net.params = config.radio;
  net.sus.reserve(config.n_sus);
  for (std::size_t i = 0; i < config.n_sus; ++i) {
    const double x = rng.uniform(0.0, config.area_side);
    const double y = rng.uniform(0.0, config.area_side);
    net.sus.push_back({x, y});
  }
  return net;
}

inline Network with_target_pf(Network net, double pf_target) {
  net.params.lambda = lambda_for_target_pf(pf_target, net.params.m);
  return net;
}

// --- single instance ------------------------------------------------------

struct SchemeMetrics {
  double avg_missing = 0.0;
  double avg_false_alarm = 0.0;
  std::size_t max_size = 1;
  double avg_size = 1.0;  // mean coalition size
};

struct InstanceMetrics {
  SchemeMetrics noncoop;
  SchemeMetrics distributed;
  std::optional<SchemeMetrics> centralized;
  Partition distributed_partition;
  std::optional<Partition> centralized_partition;
  FormationTrace trace;
};

namespace detail {

// Per-SU average: each SU takes its coalition's Q_m and Q_f.
inline SchemeMetrics per_su_metrics(const Partition& p, std::size_t n) {
  SchemeMetrics out;
  double miss = 0.0;
  double fa = 0.0;
  for (NodeId id = 1; static_cast<std::size_t>(id) <= n; ++id) {
    const auto& c = p.coalition_of(id);
    miss += c.cached.qm;
    fa += c.cached.qf;
  }
  out.avg_missing = miss / static_cast<double>(n);
  out.avg_false_alarm = fa / static_cast<double>(n);
  out.max_size = 0;
  for (const auto& c : p.coalitions) out.max_size = std::max(out.max_size, c.size());
  out.avg_size = static_cast<double>(n) / static_cast<double>(p.size());
  return out;
}

}  // namespace detail

/// Non-cooperative, distributed (merge-and-split from singletons) and, when
/// N <= centralized_cap, the exact centralized optimum.
inline InstanceMetrics run_instance(const Network& network, const GameParams& game,
                                    std::size_t centralized_cap = kCentralizedCapacity,
                                    const FormationOptions& options = {}) {
  const GameContext ctx(network, game);
  const std::size_t n = ctx.size();
  InstanceMetrics out;

  const Partition alone = singletons(ctx);
  out.noncoop = detail::per_su_metrics(alone, n);

  auto [formed, trace] = merge_split_until_stable(alone, ctx, options);
  out.distributed = detail::per_su_metrics(formed, n);
  out.distributed_partition = std::move(formed);
  out.trace = std::move(trace);

  if (n <= centralized_cap) {
    auto sol = optimal_partition(ctx, centralized_cap);
    out.centralized = detail::per_su_metrics(sol.partition, n);
    out.centralized_partition = std::move(sol.partition);
  }
  return out;
}

// --- sweeps -------------------------------------------------------------------

struct MetricsRecord {
  std::size_t n_sus = 0;
  std::optional<double> pf_target;  // empty when averaged over the pf grid
  double avg_missing_noncoop = 0.0;
  double avg_missing_distributed = 0.0;
  std::optional<double> avg_missing_centralized;
  double avg_falsealarm_noncoop = 0.0;
  double avg_falsealarm_distributed = 0.0;
  std::optional<double> avg_falsealarm_centralized;
  std::size_t max_coalition_size_observed = 0;
  double avg_max_coalition_size = 0.0;
  double avg_coalition_size = 0.0;
  std::size_t mmax_bound = 0;

  /// Relative reduction of the distributed average miss vs non-cooperative.
  double miss_reduction() const { return 1.0 - avg_missing_distributed / avg_missing_noncoop; }
};

inline const char* kSweepCsvHeader = "n,pf,miss_nc,miss_dist,miss_cent,fa_nc,fa_dist,fa_cent,maxsize_obs,maxsize_avg,mmax";

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string to_csv(const std::vector<MetricsRecord>& records) {
  std::string out = std::string(kSweepCsvHeader) + '\n';
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& r : records) {
    out += std::to_string(r.n_sus) + ',' + opt(r.pf_target) + ',' + format_double(r.avg_missing_noncoop) + ',' +
           format_double(r.avg_missing_distributed) + ',' + opt(r.avg_missing_centralized) + ',' +
           format_double(r.avg_falsealarm_noncoop) + ',' + format_double(r.avg_falsealarm_distributed) + ',' +
           opt(r.avg_falsealarm_centralized) + ',' + std::to_string(r.max_coalition_size_observed) + ',' +
           format_double(r.avg_max_coalition_size) + ',' + std::to_string(r.mmax_bound) + '\n';
  }
  return out;
}

/// One (N, pf, drop) cell of a sweep.
struct SweepCell {
  std::size_t n_sus = 0;
  std::size_t pf_index = 0;
  double pf_target = 0.0;
  std::size_t drop = 0;
};

struct CellOutcome {
  SweepCell cell;
  Network network;
  InstanceMetrics metrics;
};

/// Runs cells on `config.worker_count()` threads. Each cell builds its own
/// network from its derived stream, so the outcome does not depend on
/// scheduling; results come back in the order of `cells`.
inline std::vector<CellOutcome> run_sweep_cells(const ScenarioConfig& config, const std::vector<SweepCell>& cells,
                                                const FormationOptions& options = {}) {
  config.validate();
  std::vector<std::optional<CellOutcome>> slots(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        const auto& cell = cells[i];
        ScenarioConfig local = config;
        local.n_sus = cell.n_sus;
        Network net = with_target_pf(deploy_random(local, cell.drop), cell.pf_target);
        auto metrics = run_instance(net, config.game, config.centralized_cap, options);
        slots[i] = CellOutcome{cell, std::move(net), std::move(metrics)};
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = cells.size();
      }
    }
  };

  const std::size_t workers = std::min(config.worker_count(), std::max<std::size_t>(1, cells.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<CellOutcome> out;
  out.reserve(cells.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

/// Cells for every (N, pf, drop), sorted by (N, pf, drop).
inline std::vector<SweepCell> make_cells(const ScenarioConfig& config, const std::vector<std::size_t>& n_list) {
  std::vector<SweepCell> cells;
  for (auto n : n_list)
    for (std::size_t k = 0; k < config.pf_grid.size(); ++k)
      for (std::size_t d = 0; d < config.drops; ++d) cells.push_back({n, k, config.pf_grid[k], d});
  return cells;
}

/// Deterministic fold of a group of cells into one record. Centralized
/// columns are filled only when every cell has them.
inline MetricsRecord aggregate(const std::vector<const CellOutcome*>& group, const GameParams& game) {
  MetricsRecord r;
  if (group.empty()) return r;
  r.n_sus = group.front()->cell.n_sus;
  const double count = static_cast<double>(group.size());
  bool have_central = true;
  double miss_c = 0.0;
  double fa_c = 0.0;
  double min_pf = 1.0;
  for (const auto* o : group) {
    const auto& m = o->metrics;
    r.avg_missing_noncoop += m.noncoop.avg_missing;
    r.avg_missing_distributed += m.distributed.avg_missing;
    r.avg_falsealarm_noncoop += m.noncoop.avg_false_alarm;
    r.avg_falsealarm_distributed += m.distributed.avg_false_alarm;
    r.max_coalition_size_observed = std::max(r.max_coalition_size_observed, m.distributed.max_size);
    r.avg_max_coalition_size += static_cast<double>(m.distributed.max_size);
    r.avg_coalition_size += m.distributed.avg_size;
    if (m.centralized) {
      miss_c += m.centralized->avg_missing;
      fa_c += m.centralized->avg_false_alarm;
    } else {
      have_central = false;
    }
    min_pf = std::min(min_pf, o->cell.pf_target);
  }
  r.avg_missing_noncoop /= count;
  r.avg_missing_distributed /= count;
  r.avg_falsealarm_noncoop /= count;
  r.avg_falsealarm_distributed /= count;
  r.avg_max_coalition_size /= count;
  r.avg_coalition_size /= count;
  if (have_central) {
    r.avg_missing_centralized = miss_c / count;
    r.avg_falsealarm_centralized = fa_c / count;
  }
  // loosest bound over the group: the one for its smallest pf
  r.mmax_bound = max_coalition_size(game.alpha, min_pf);
  return r;
}

/// One record per N, averaged over drops and the pf grid.
inline std::vector<MetricsRecord> records_by_n(const std::vector<CellOutcome>& outcomes, const GameParams& game) {
  std::vector<MetricsRecord> out;
  std::size_t i = 0;
  while (i < outcomes.size()) {
    std::vector<const CellOutcome*> group;
    const std::size_t n = outcomes[i].cell.n_sus;
    for (; i < outcomes.size() && outcomes[i].cell.n_sus == n; ++i) group.push_back(&outcomes[i]);
    out.push_back(aggregate(group, game));
  }
  return out;
}

/// One record per pf target, averaged over drops.
inline std::vector<MetricsRecord> records_by_pf(const std::vector<CellOutcome>& outcomes, const GameParams& game) {
  std::vector<MetricsRecord> out;
  std::size_t i = 0;
  while (i < outcomes.size()) {
    std::vector<const CellOutcome*> group;
    const auto key = std::pair(outcomes[i].cell.n_sus, outcomes[i].cell.pf_index);
    for (; i < outcomes.size() && std::pair(outcomes[i].cell.n_sus, outcomes[i].cell.pf_index) == key; ++i)
      group.push_back(&outcomes[i]);
    auto r = aggregate(group, game);
    r.pf_target = group.front()->cell.pf_target;
    out.push_back(r);
  }
  return out;
}

inline std::vector<MetricsRecord> sweep_network_size(const ScenarioConfig& config,
                                                     const std::vector<std::size_t>& n_list) {
  if (n_list.empty()) throw std::invalid_argument("sweep_network_size: empty n_list");
  return records_by_n(run_sweep_cells(config, make_cells(config, n_list)), config.game);
}

inline std::vector<MetricsRecord> sweep_pf(const ScenarioConfig& config, std::size_t n_fixed) {
  return records_by_pf(run_sweep_cells(config, make_cells(config, {n_fixed})), config.game);
}

// --- mobility -------------------------------------------------------------------

/// Straight-line motion of one node. Node 0 is the PU.
struct Trajectory {
  NodeId node = 1;
  double dir_x = 1.0;
  double dir_y = 0.0;
  double step = 10.0;  // meters per tick
  std::size_t n_steps = 1;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct MobilitySample {
  std::size_t step = 0;
  double displacement = 0.0;
  Partition partition;
  UtilityMap utilities;
  std::vector<FormationEvent> events;  // formation events applied at this tick
  bool reformed = false;
};

struct MobilityTrace {
  NodeId mover = 1;
  std::vector<MobilitySample> samples;

  /// `step,displacement_m,node_id,coalition_id,utility`; the coalition id is
  /// the lowest member id of the SU's coalition.
  std::string to_csv() const {
    std::string out = "step,displacement_m,node_id,coalition_id,utility\n";
    for (const auto& s : samples) {
      for (const auto& [id, u] : s.utilities) {
        std::ostringstream row;
        row.precision(17);
        row << s.step << ',' << s.displacement << ',' << id << ',' << s.partition.coalition_of(id).min_id() << ',' << u
            << '\n';
        out += row.str();
      }
    }
    return out;
  }
};

/// Moves `trajectory.node` one step per tick and re-runs merge-and-split
/// from the current partition every `theta_steps` ticks. Sample 0 is the
/// formation from singletons before any motion.
inline MobilityTrace mobility_run(const Network& network, const Trajectory& trajectory, std::size_t theta_steps,
                                  const GameParams& game, const FormationOptions& options = {}) {
  if (trajectory.n_steps < 1) throw std::invalid_argument("mobility_run: n_steps must be >= 1");
  if (theta_steps < 1) throw std::invalid_argument("mobility_run: theta_steps must be >= 1");
  if (trajectory.node < 0 || static_cast<std::size_t>(trajectory.node) > network.size())
    throw std::out_of_range("mobility_run: unknown node " + std::to_string(trajectory.node));
  const double norm = std::hypot(trajectory.dir_x, trajectory.dir_y);
  if (!(norm > 0.0) || !std::isfinite(norm)) throw std::invalid_argument("mobility_run: bad direction");
  const double ux = trajectory.dir_x / norm;
  const double uy = trajectory.dir_y / norm;

  MobilityTrace trace;
  trace.mover = trajectory.node;
  Network net = network;
  GameContext ctx(net, game);
  auto [partition, first] = merge_split_until_stable(singletons(ctx), ctx, options);
  trace.samples.push_back({0, 0.0, partition, partition.utilities(), first.events, true});

  for (std::size_t tick = 1; tick <= trajectory.n_steps; ++tick) {
    Position& p = trajectory.node == 0 ? net.pu : net.sus[static_cast<std::size_t>(trajectory.node - 1)];
    p.x += ux * trajectory.step;
    p.y += uy * trajectory.step;
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw std::range_error("mobility_run: node left numeric range");
    ctx = GameContext(net, game);
    MobilitySample sample;
    sample.step = tick;
    sample.displacement = trajectory.step * static_cast<double>(tick);
    if (tick % theta_steps == 0) {
      auto [next, t] = merge_split_until_stable(partition, ctx, options);
      partition = std::move(next);
      sample.events = std::move(t.events);
      sample.reformed = true;
    } else {
      partition = reevaluate(partition, ctx);
    }
    sample.partition = partition;
    sample.utilities = partition.utilities();
    trace.samples.push_back(std::move(sample));
  }
  return trace;
}

// --- Monte-Carlo check of the fusion formulas ---------------------------------

struct MonteCarloResult {
  double qm = 0.0;
  double qf = 0.0;
  double qm_stderr = 0.0;
  double qf_stderr = 0.0;
  std::size_t trials = 0;
};

/// Bit-level OR-fusion over explicit per-member probabilities: each member
/// decides locally, its report reaches the head through a binary symmetric
/// channel with flip probability `pe[i]` and the head ORs what it receives.
inline MonteCarloResult monte_carlo_fusion(std::span<const double> pm, std::span<const double> pe, double pf,
                                           std::size_t trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("monte_carlo_fusion: trials must be >= 1");
  if (pm.size() != pe.size() || pm.empty()) throw std::invalid_argument("monte_carlo_fusion: size mismatch");
  Rng rng(seed);
  std::size_t misses = 0;
  std::size_t alarms = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    bool detected = false;
    bool alarm = false;
    for (std::size_t i = 0; i < pm.size(); ++i) {
      // PU present: local bit is 1 unless the member misses
      bool bit = !rng.bernoulli(pm[i]);
      if (rng.bernoulli(pe[i])) bit = !bit;
      detected = detected || bit;
      // PU absent: local bit is 1 on a false alarm
      bool quiet_bit = rng.bernoulli(pf);
      if (rng.bernoulli(pe[i])) quiet_bit = !quiet_bit;
      alarm = alarm || quiet_bit;
    }
    misses += detected ? 0 : 1;
    alarms += alarm ? 1 : 0;
  }
  MonteCarloResult r;
  r.trials = trials;
  const double n = static_cast<double>(trials);
  r.qm = static_cast<double>(misses) / n;
  r.qf = static_cast<double>(alarms) / n;
  r.qm_stderr = std::sqrt(r.qm * (1.0 - r.qm) / n);
  r.qf_stderr = std::sqrt(r.qf * (1.0 - r.qf) / n);
  return r;
}

/// monte_carlo_fusion for a coalition of `ctx`; the head's own bit is not
/// flipped.
inline MonteCarloResult monte_carlo_validate(const Coalition& coalition, const GameContext& ctx, std::size_t trials,
                                             std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("monte_carlo_validate: trials must be >= 1");
  std::vector<double> pm;
  std::vector<double> pe;
  for (NodeId id : coalition.members) {
    pm.push_back(ctx.missing(id));
    pe.push_back(ctx.report_error(id, coalition.head));
  }
  return monte_carlo_fusion(pm, pe, ctx.pf(), trials, seed);
}

}  // namespace coalsense
