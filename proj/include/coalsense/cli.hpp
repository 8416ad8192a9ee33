#pragma once

// Command-line front end: JSON configuration, overrides, subcommands and
// atomic CSV output.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "coalsense/centralized_oracle.hpp"
#include "coalsense/coalition_game.hpp"
#include "coalsense/formation_engine.hpp"
#include "coalsense/scenario_sim.hpp"

namespace coalsense::cli {

/// Invalid or unknown configuration. `key()` names the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error("config key '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct CliConfig {
  ScenarioConfig scenario;
  double pf = 0.01;                     // single-instance commands
  std::vector<Position> su_positions;   // explicit geometry; empty = random drop
  Trajectory trajectory;                // mobility
  std::size_t theta_steps = 1;
  std::size_t mc_trials = 100000;       // validate
  std::size_t mc_coalitions = 50;

  friend bool operator==(const CliConfig&, const CliConfig&) = default;
};

inline nlohmann::json to_json(const CliConfig& c) {
  const auto& s = c.scenario;
  nlohmann::json j;
  j["n_sus"] = s.n_sus;
  j["area_side"] = s.area_side;
  if (s.pu_position) {
    j["pu_x"] = s.pu_position->x;
    j["pu_y"] = s.pu_position->y;
  }
  j["pu_power"] = s.radio.pu_power;
  j["su_report_power"] = s.radio.su_report_power;
  j["noise"] = s.radio.noise;
  j["kappa"] = s.radio.kappa;
  j["mu"] = s.radio.mu;
  j["m"] = s.radio.m;
  j["alpha"] = s.game.alpha;
  j["seed"] = s.seed;
  j["drops"] = s.drops;
  j["pf_grid"] = s.pf_grid;
  j["n_list"] = s.n_list;
  j["centralized_cap"] = s.centralized_cap;
  j["threads"] = s.threads;
  j["pf"] = c.pf;
  auto positions = nlohmann::json::array();
  for (const auto& p : c.su_positions) positions.push_back({p.x, p.y});
  j["su_positions"] = positions;
  j["mover"] = c.trajectory.node;
  j["dir_x"] = c.trajectory.dir_x;
  j["dir_y"] = c.trajectory.dir_y;
  j["step_m"] = c.trajectory.step;
  j["n_steps"] = c.trajectory.n_steps;
  j["theta_steps"] = c.theta_steps;
  j["mc_trials"] = c.mc_trials;
  j["mc_coalitions"] = c.mc_coalitions;
  return j;
}

/// Builds a configuration from the flat JSON schema, starting from the
/// defaults. Unknown keys and ill-typed values raise ConfigError.
inline CliConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("<root>", "configuration must be a JSON object");
  CliConfig c;
  auto& s = c.scenario;
  std::optional<double> pu_x;
  std::optional<double> pu_y;

  for (const auto& [key, value] : j.items()) {
    auto get = [&]<class T>(T& dst) {
      try {
        dst = value.get<T>();
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(key, e.what());
      }
    };
    auto get_count = [&](std::size_t& dst) {
      if (!value.is_number_integer() || value.get<long long>() < 0)
        throw ConfigError(key, "expected a non-negative integer");
      dst = value.get<std::size_t>();
    };
    if (key == "n_sus") get_count(s.n_sus);
    else if (key == "area_side") get(s.area_side);
    else if (key == "pu_x") { double v; get(v); pu_x = v; }
    else if (key == "pu_y") { double v; get(v); pu_y = v; }
    else if (key == "pu_power") get(s.radio.pu_power);
    else if (key == "su_report_power") get(s.radio.su_report_power);
    else if (key == "noise") get(s.radio.noise);
    else if (key == "kappa") get(s.radio.kappa);
    else if (key == "mu") get(s.radio.mu);
    else if (key == "m") {
      if (!value.is_number_integer()) throw ConfigError(key, "expected an integer");
      s.radio.m = value.get<int>();
    }
    else if (key == "alpha") get(s.game.alpha);
    else if (key == "seed") {
      if (!value.is_number_integer()) throw ConfigError(key, "expected an integer");
      s.seed = value.get<std::uint64_t>();
    }
    else if (key == "drops") get_count(s.drops);
    else if (key == "pf_grid") get(s.pf_grid);
    else if (key == "n_list") {
      if (!value.is_array()) throw ConfigError(key, "expected an array of integers");
      s.n_list.clear();
      for (const auto& v : value) {
        if (!v.is_number_integer() || v.get<long long>() < 1) throw ConfigError(key, "entries must be integers >= 1");
        s.n_list.push_back(v.get<std::size_t>());
      }
    }
    else if (key == "centralized_cap") get_count(s.centralized_cap);
    else if (key == "threads") get_count(s.threads);
    else if (key == "pf") get(c.pf);
    else if (key == "su_positions") {
      if (!value.is_array()) throw ConfigError(key, "expected an array of [x, y] pairs");
      c.su_positions.clear();
      for (const auto& p : value) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
          throw ConfigError(key, "expected an array of [x, y] pairs");
        c.su_positions.push_back({p[0].get<double>(), p[1].get<double>()});
      }
    }
    else if (key == "mover") get(c.trajectory.node);
    else if (key == "dir_x") get(c.trajectory.dir_x);
    else if (key == "dir_y") get(c.trajectory.dir_y);
    else if (key == "step_m") get(c.trajectory.step);
    else if (key == "n_steps") get_count(c.trajectory.n_steps);
    else if (key == "theta_steps") get_count(c.theta_steps);
    else if (key == "mc_trials") get_count(c.mc_trials);
    else if (key == "mc_coalitions") get_count(c.mc_coalitions);
    else throw ConfigError(key, "unknown key");
  }
  if (pu_x.has_value() != pu_y.has_value()) throw ConfigError(pu_x ? "pu_y" : "pu_x", "pu_x and pu_y go together");
  if (pu_x) s.pu_position = Position{*pu_x, *pu_y};
  if (!c.su_positions.empty()) s.n_sus = c.su_positions.size();
  return c;
}

/// Checks value ranges, reporting the first offending key.
inline void validate(const CliConfig& c) {
  const auto& s = c.scenario;
  auto require = [](bool ok, const char* key, const char* msg) {
    if (!ok) throw ConfigError(key, msg);
  };
  require(s.n_sus >= 1, "n_sus", "must be >= 1");
  require(s.area_side > 0.0 && std::isfinite(s.area_side), "area_side", "must be > 0");
  require(s.radio.pu_power > 0.0, "pu_power", "must be > 0");
  require(s.radio.su_report_power > 0.0, "su_report_power", "must be > 0");
  require(s.radio.noise > 0.0, "noise", "must be > 0");
  require(s.radio.kappa > 0.0, "kappa", "must be > 0");
  require(s.radio.mu >= 2.0, "mu", "must be >= 2");
  require(s.radio.m >= 2, "m", "must be >= 2");
  require(s.game.alpha > 0.0 && s.game.alpha < 1.0, "alpha", "must lie in (0,1)");
  require(s.drops >= 1, "drops", "must be >= 1");
  require(!s.pf_grid.empty(), "pf_grid", "must not be empty");
  for (double pf : s.pf_grid) require(pf > 0.0 && pf < s.game.alpha, "pf_grid", "entries must lie in (0, alpha)");
  require(c.pf > 0.0 && c.pf < 1.0, "pf", "must lie in (0,1)");
  require(c.theta_steps >= 1, "theta_steps", "must be >= 1");
  require(c.trajectory.n_steps >= 1, "n_steps", "must be >= 1");
  require(c.mc_trials >= 1, "mc_trials", "must be >= 1");
  for (const auto& p : c.su_positions)
    require(std::isfinite(p.x) && std::isfinite(p.y), "su_positions", "coordinates must be finite");
}

/// Applies `key=value`; the value is read as JSON when it parses, as a
/// string otherwise.
inline void apply_override(nlohmann::json& j, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(kv, "override must look like key=value");
  const std::string key = kv.substr(0, eq);
  const std::string raw = kv.substr(eq + 1);
  auto parsed = nlohmann::json::parse(raw, nullptr, false);
  j[key] = parsed.is_discarded() ? nlohmann::json(raw) : parsed;
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so the target never holds a partial file.
inline void write_atomically(const std::filesystem::path& target, const std::string& content) {
  auto tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp.string());
    os << content;
    os.flush();
    if (!os) {
      std::filesystem::remove(tmp);
      throw std::runtime_error("write failed: " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, target);
}

inline Network network_for(const CliConfig& c) {
  Network net;
  if (c.su_positions.empty()) {
    net = deploy_random(c.scenario, 0);
  } else {
    net.pu = c.scenario.pu();
    net.sus = c.su_positions;
    net.params = c.scenario.radio;
  }
  return with_target_pf(std::move(net), c.pf);
}

/// Per-coalition table: head, members, Q_m, Q_f, value.
inline std::string coalition_report(const std::string& title, const Partition& p) {
  std::ostringstream os;
  os.precision(6);
  os << title << '\n';
  for (const auto& c : p.coalitions) {
    os << "  " << format_members(c.members) << " head=" << c.head << " Qm=" << c.cached.qm << " Qf=" << c.cached.qf
       << " v=" << c.cached.value << '\n';
  }
  return os.str();
}

struct CommonOptions {
  std::string config_path;
  std::string out;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> drops;
  std::optional<double> alpha;
  std::optional<double> pf;
  std::optional<std::size_t> n;
  std::optional<std::size_t> threads;
  std::optional<std::size_t> centralized_cap;
};

inline CliConfig load_config(const CommonOptions& o) {
  nlohmann::json j = nlohmann::json::object();
  if (!o.config_path.empty()) {
    std::ifstream is(o.config_path);
    if (!is) throw ConfigError("--config", "cannot open " + o.config_path);
    j = nlohmann::json::parse(is, nullptr, false);
    if (j.is_discarded()) throw ConfigError("--config", "malformed JSON in " + o.config_path);
  }
  for (const auto& kv : o.overrides) apply_override(j, kv);
  if (o.seed) j["seed"] = *o.seed;
  if (o.drops) j["drops"] = *o.drops;
  if (o.alpha) j["alpha"] = *o.alpha;
  if (o.pf) j["pf"] = *o.pf;
  if (o.n) j["n_sus"] = *o.n;
  if (o.threads) j["threads"] = *o.threads;
  if (o.centralized_cap) j["centralized_cap"] = *o.centralized_cap;
  CliConfig c = config_from_json(j);
  validate(c);
  if (c.scenario.centralized_cap > kCentralizedExtendedCapacity)
    throw CapacityError("centralized cap " + std::to_string(c.scenario.centralized_cap) + " exceeds 14");
  if (c.scenario.centralized_cap > kCentralizedCapacity)
    std::cerr << "warning: centralized cap above 12 makes exhaustive search very slow\n";
  return c;
}

/// Entry point. Exit codes: 0 success, 1 configuration error, 2 capacity
/// error.
inline int parse_and_run(int argc, const char* const* argv, std::ostream& out = std::cout,
                         std::ostream& err = std::cerr) {
  CLI::App app{"Coalition formation for collaborative spectrum sensing"};
  app.require_subcommand(1);
  CommonOptions o;

  auto add_common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", o.config_path, "JSON configuration file");
    auto* opt = sub->add_option("--out", o.out, "output path");
    if (needs_out) opt->required();
    sub->add_option("--set", o.overrides, "override, key=value (repeatable)");
    sub->add_option("--seed", o.seed, "base seed");
    sub->add_option("--drops", o.drops, "random deployments per cell");
    sub->add_option("--alpha", o.alpha, "false-alarm constraint");
    sub->add_option("--pf", o.pf, "non-cooperative false alarm for single-instance commands");
    sub->add_option("--n", o.n, "number of SUs");
    sub->add_option("--threads", o.threads, "worker threads (0: all cores)");
    sub->add_option("--centralized-cap", o.centralized_cap, "largest N solved exactly (<= 14)");
  };

  auto* sweep_n = app.add_subcommand("sweep-n", "average metrics vs network size");
  add_common(sweep_n, true);
  auto* sweep_p = app.add_subcommand("sweep-pf", "average metrics vs non-cooperative false alarm");
  add_common(sweep_p, true);
  auto* mobility = app.add_subcommand("mobility", "move one node and re-form coalitions");
  add_common(mobility, true);
  std::string trace_log;
  mobility->add_option("--trace-log", trace_log, "write formation events here");
  auto* snapshot = app.add_subcommand("snapshot", "distributed and centralized partitions of one drop");
  add_common(snapshot, true);
  bool no_centralized = false;
  snapshot->add_flag("--no-centralized", no_centralized, "skip the exhaustive benchmark");
  auto* validate_cmd = app.add_subcommand("validate", "Monte-Carlo check of the fusion formulas");
  add_common(validate_cmd, true);
  auto* mmax = app.add_subcommand("mmax", "coalition-size bound");
  double mmax_alpha = 0.1;
  double mmax_pf = 0.01;
  mmax->add_option("--alpha", mmax_alpha, "false-alarm constraint");
  mmax->add_option("--pf", mmax_pf, "non-cooperative false alarm")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (*mmax) {
      out << max_coalition_size(mmax_alpha, mmax_pf) << '\n';
      return 0;
    }

    const CliConfig cfg = load_config(o);
    const auto& sc = cfg.scenario;

    if (*sweep_n) {
      write_atomically(o.out, to_csv(sweep_network_size(sc, sc.n_list)));
    } else if (*sweep_p) {
      write_atomically(o.out, to_csv(sweep_pf(sc, sc.n_sus)));
    } else if (*mobility) {
      const Network net = network_for(cfg);
      const auto trace = mobility_run(net, cfg.trajectory, cfg.theta_steps, sc.game);
      write_atomically(o.out, trace.to_csv());
      if (!trace_log.empty()) {
        std::string log;
        for (const auto& s : trace.samples)
          for (const auto& e : s.events) log += "step " + std::to_string(s.step) + ' ' + e.to_string() + '\n';
        write_atomically(trace_log, log);
      }
    } else if (*snapshot) {
      const Network net = network_for(cfg);
      if (!no_centralized && net.size() > sc.centralized_cap)
        throw CapacityError("snapshot: N=" + std::to_string(net.size()) + " exceeds centralized cap " +
                            std::to_string(sc.centralized_cap) + " (use --no-centralized)");
      const GameContext ctx(net, sc.game);
      auto [dist, trace] = merge_split_until_stable(singletons(ctx), ctx);
      std::string report = coalition_report("distributed", dist);
      write_atomically(o.out + ".distributed.txt", dist.snapshot());
      if (!no_centralized) {
        const auto sol = optimal_partition(ctx, sc.centralized_cap);
        report += coalition_report("centralized", sol.partition);
        write_atomically(o.out + ".centralized.txt", sol.partition.snapshot());
      }
      write_atomically(o.out + ".trace.log", trace.to_log());
      write_atomically(o.out + ".report.txt", report);
      out << report;
    } else if (*validate_cmd) {
      std::ostringstream csv;
      csv.precision(10);
      csv << "index,size,qm,qm_mc,qm_se,qf,qf_mc,qf_se,within_4se\n";
      std::size_t pass = 0;
      for (std::size_t k = 0; k < cfg.mc_coalitions; ++k) {
        Network net = with_target_pf(deploy_random(sc, k), cfg.pf);
        const GameContext ctx(net, sc.game);
        Rng pick(derive_stream_seed(sc.seed, {0x7a11da7eull, k}));
        Members members;
        const std::size_t want = 1 + static_cast<std::size_t>(pick.uniform01() * std::min<std::size_t>(5, net.size()));
        while (members.size() < want) {
          const NodeId id = 1 + static_cast<NodeId>(pick.uniform01() * static_cast<double>(net.size()));
          if (std::find(members.begin(), members.end(), id) == members.end()) members.push_back(id);
        }
        const Coalition c = ctx.evaluate(members);
        const auto mc = monte_carlo_validate(c, ctx, cfg.mc_trials, derive_stream_seed(sc.seed, {0x3c0ffeeull, k}));
        const double n = static_cast<double>(cfg.mc_trials);
        const double se_m = std::sqrt(c.cached.qm * (1 - c.cached.qm) / n);
        const double se_f = std::sqrt(c.cached.qf * (1 - c.cached.qf) / n);
        const bool ok = std::abs(mc.qm - c.cached.qm) <= 4 * se_m && std::abs(mc.qf - c.cached.qf) <= 4 * se_f;
        pass += ok;
        csv << k << ',' << c.size() << ',' << c.cached.qm << ',' << mc.qm << ',' << mc.qm_stderr << ','
            << c.cached.qf << ',' << mc.qf << ',' << mc.qf_stderr << ',' << (ok ? 1 : 0) << '\n';
      }
      write_atomically(o.out, csv.str());
      out << pass << "/" << cfg.mc_coalitions << " coalitions within 4 standard errors\n";
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const CapacityError& e) {
    err << "capacity error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace coalsense::cli
