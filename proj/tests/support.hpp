#pragma once

// Shared fixtures for the unit and acceptance suites.

#include <cstdint>
#include <random>
#include <vector>

#include "coalsense/formation_engine.hpp"
#include "coalsense/scenario_sim.hpp"

namespace coalsense::testing {

/// Uniform deployment on a side x side square with the PU in the middle and
/// the detector threshold set for `pf`.
inline Network random_network(std::mt19937_64& gen, std::size_t n, double pf, double side = 3000.0) {
  std::uniform_real_distribution<double> u(0.0, side);
  Network net;
  net.pu = {side / 2, side / 2};
  for (std::size_t i = 0; i < n; ++i) net.sus.push_back({u(gen), u(gen)});
  return with_target_pf(net, pf);
}

/// Network from explicit SU positions, PU at the origin.
inline Network network_at(std::vector<Position> sus, double pf, Position pu = {0.0, 0.0}) {
  Network net;
  net.pu = pu;
  net.sus = std::move(sus);
  return with_target_pf(net, pf);
}

inline std::vector<double> utilities_of(const Partition& p) {
  std::vector<double> out;
  for (const auto& [id, u] : p.utilities()) out.push_back(u.to_double());
  return out;
}

}  // namespace coalsense::testing
