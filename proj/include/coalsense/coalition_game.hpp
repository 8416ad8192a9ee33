#pragma once

// Utility, barrier cost, Pareto order and the coalition-size bound of the
// non-transferable-utility sensing game.

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>

#include "coalsense/extended_real.hpp"
#include "coalsense/sensing_math.hpp"

namespace coalsense {

struct GameParams {
  double alpha = 0.1;  // maximum tolerable false alarm per coalition

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
  }

  friend bool operator==(const GameParams&, const GameParams&) = default;
};

/// Coalition performance. `value` is -inf exactly when qf >= alpha.
struct CoalitionValue {
  double qm = 1.0;
  double qf = 0.0;
  ExtendedReal value;

  friend bool operator==(const CoalitionValue&, const CoalitionValue&) = default;
};

/// Logarithmic barrier on the coalition false alarm:
/// -alpha^2 ln(1 - (qf/alpha)^2) below alpha, +inf at or above it.
inline ExtendedReal cost(double qf, double alpha) {
  if (!(qf >= 0.0 && qf <= 1.0)) throw std::domain_error("cost: qf outside [0,1]");
  if (qf >= alpha) return ExtendedReal::pos_inf();
  const double ratio = qf / alpha;
  return ExtendedReal(-alpha * alpha * std::log1p(-ratio * ratio));
}

inline CoalitionValue coalition_value(double qm, double qf, double alpha) {
  if (!(qm >= 0.0 && qm <= 1.0)) throw std::domain_error("coalition_value: qm outside [0,1]");
  return CoalitionValue{qm, qf, ExtendedReal(1.0 - qm) - cost(qf, alpha)};
}

using UtilityMap = std::map<NodeId, ExtendedReal>;

/// Pareto order: nobody in `r` is worse off than in `s` and somebody is
/// strictly better off. Comparisons are exact.
inline bool pareto_preferred(const UtilityMap& r, const UtilityMap& s) {
  if (r.size() != s.size()) throw std::domain_error("pareto_preferred: player sets differ");
  bool strict = false;
  auto it = s.begin();
  for (const auto& [player, ur] : r) {
    if (it->first != player) throw std::domain_error("pareto_preferred: player sets differ");
    const ExtendedReal& us = it->second;
    if (ur < us) return false;
    if (ur > us) strict = true;
    ++it;
  }
  return strict;
}

/// Pareto order specialised to the game's non-transferable utilities: every
/// player of a coalition holds that coalition's value, so merging `parts`
/// into one coalition worth `merged` is preferred iff no part loses and at
/// least one part gains.
inline bool merge_preferred(const ExtendedReal& merged, std::span<const ExtendedReal> parts) {
  bool strict = false;
  for (const auto& v : parts) {
    if (merged < v) return false;
    if (merged > v) strict = true;
  }
  return strict;
}

/// Splitting a coalition worth `whole` into blocks worth `parts`.
inline bool split_preferred(std::span<const ExtendedReal> parts, const ExtendedReal& whole) {
  bool strict = false;
  for (const auto& v : parts) {
    if (v < whole) return false;
    if (v > whole) strict = true;
  }
  return strict;
}

/// Largest coalition whose false alarm stays below alpha with perfect
/// reporting, floor(ln(1-alpha)/ln(1-pf)), never less than one.
inline std::size_t max_coalition_size(double alpha, double pf) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("max_coalition_size: alpha must lie in (0,1)");
  if (!(pf > 0.0 && pf < 1.0)) throw std::domain_error("max_coalition_size: pf must lie in (0,1)");
  const double ratio = std::log1p(-alpha) / std::log1p(-pf);
  if (!(ratio < static_cast<double>(std::numeric_limits<std::size_t>::max() / 2)))
    return std::numeric_limits<std::size_t>::max();
  const auto bound = static_cast<std::size_t>(std::floor(ratio));
  return bound < 1 ? 1 : bound;
}

}  // namespace coalsense
