#pragma once

// Closed-form sensing probabilities for energy detectors under Rayleigh
// fading, BPSK reporting error, and OR-rule fusion inside a coalition.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace coalsense {

using NodeId = int;

/// Physical constants shared by every node. Powers and noise are in mW,
/// distances in meters.
struct RadioParams {
  double pu_power = 100.0;
  double su_report_power = 10.0;
  double noise = 1e-9;  // -90 dBm
  double kappa = 1.0;
  double mu = 3.0;
  int m = 5;            // time-bandwidth product
  double lambda = 16.0; // energy-detection threshold

  void validate() const {
    if (!(pu_power > 0.0)) throw std::invalid_argument("pu_power must be > 0");
    if (!(su_report_power > 0.0)) throw std::invalid_argument("su_report_power must be > 0");
    if (!(noise > 0.0)) throw std::invalid_argument("noise must be > 0");
    if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be > 0");
    if (!(mu >= 2.0)) throw std::invalid_argument("mu must be >= 2");
    if (m < 2) throw std::invalid_argument("m must be >= 2");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be > 0");
  }

  friend bool operator==(const RadioParams&, const RadioParams&) = default;
};

struct Position {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Position&, const Position&) = default;
};

inline double distance(const Position& a, const Position& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// A single primary user and N secondary users. SU ids are 1..N and map to
/// `sus[id - 1]`.
struct Network {
  Position pu;
  std::vector<Position> sus;
  RadioParams params;

  std::size_t size() const { return sus.size(); }

  const Position& position(NodeId id) const {
    if (id < 1 || static_cast<std::size_t>(id) > sus.size())
      throw std::out_of_range("unknown SU id " + std::to_string(id));
    return sus[static_cast<std::size_t>(id - 1)];
  }

  void validate() const {
    if (sus.empty()) throw std::invalid_argument("network needs at least one SU");
    auto finite = [](const Position& p) { return std::isfinite(p.x) && std::isfinite(p.y); };
    if (!finite(pu)) throw std::invalid_argument("PU position is not finite");
    for (const auto& p : sus)
      if (!finite(p)) throw std::invalid_argument("SU position is not finite");
    params.validate();
  }
};

inline double path_loss(double d, double kappa, double mu) {
  if (!(d > 0.0)) throw std::domain_error("path_loss: distance must be > 0");
  return kappa / std::pow(d, mu);
}

inline double avg_snr(double tx_power, double d, const RadioParams& params) {
  return tx_power * path_loss(d, params.kappa, params.mu) / params.noise;
}

namespace detail {

// e^{-a} * sum_{n=0}^{count-1} a^n / n!, Kahan-compensated.
inline double poisson_head(double a, int count) {
  if (count <= 0) return 0.0;
  double term = std::exp(-a);
  double sum = 0.0;
  double carry = 0.0;
  for (int n = 0; n < count; ++n) {
    if (n > 0) term *= a / n;
    const double y = term - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  return sum;
}

}  // namespace detail

/// Non-cooperative false-alarm probability Gamma(m, lambda/2) / Gamma(m).
/// For integer m this is the Poisson head e^{-a} sum_{n<m} a^n/n!, a = lambda/2.
inline double false_alarm_probability(double lambda, int m) {
  if (!(lambda >= 0.0)) throw std::domain_error("false_alarm_probability: lambda must be >= 0");
  if (m < 1) throw std::domain_error("false_alarm_probability: m must be >= 1");
  if (std::isinf(lambda)) return 0.0;
  const double p = detail::poisson_head(lambda / 2.0, m);
  return std::min(1.0, std::max(0.0, p));
}

/// Detection probability of a single energy detector at average SNR `snr_pu`.
///
/// With a = lambda/2 and r = snr/(1+snr), the bracketed difference in the
/// closed form equals e^{-a} sum_{n>=m-1} (a r)^n / n!, so the second term is
///
///     e^{-a} sum_{j>=0} a^{m-1+j} r^j / (m-1+j)!
///
/// which has only positive terms. Evaluating it this way avoids the
/// ((1+snr)/snr)^{m-1} blow-up against a vanishing bracket at low SNR.
inline double detection_probability(double snr_pu, double lambda, int m) {
  if (!(snr_pu > 0.0)) throw std::domain_error("detection_probability: snr must be > 0");
  if (!(lambda >= 0.0)) throw std::domain_error("detection_probability: lambda must be >= 0");
  if (m < 2) throw std::domain_error("detection_probability: m must be >= 2");
  if (lambda == 0.0) return 1.0;
  if (std::isinf(snr_pu)) return 1.0;

  const double a = lambda / 2.0;
  const double r = snr_pu / (1.0 + snr_pu);
  const double head = detail::poisson_head(a, m - 1);

  const int k0 = m - 1;
  double term = std::exp(-a + k0 * std::log(a) - std::lgamma(static_cast<double>(k0) + 1.0));
  double tail = 0.0;
  double carry = 0.0;
  const double ar = a * r;
  for (int j = 0; j < 100000; ++j) {
    if (j > 0) term *= ar / (k0 + j);
    const double y = term - carry;
    const double t = tail + y;
    carry = (t - tail) - y;
    tail = t;
    if (j > ar && term <= tail * 1e-18) break;
  }
  return std::min(1.0, std::max(0.0, head + tail));
}

inline double missing_probability(double snr_pu, double lambda, int m) {
  return 1.0 - detection_probability(snr_pu, lambda, m);
}

/// BPSK bit error over a Rayleigh link with average SNR `snr_link`.
inline double reporting_error_probability(double snr_link) {
  if (!(snr_link >= 0.0)) throw std::domain_error("reporting_error_probability: snr must be >= 0");
  if (std::isinf(snr_link)) return 0.0;
  // 1 - sqrt(g/(1+g)) written to stay accurate for large g
  const double s = std::sqrt(snr_link / (1.0 + snr_link));
  const double one_minus_s = (1.0 / (1.0 + snr_link)) / (1.0 + s);
  return 0.5 * one_minus_s;
}

namespace detail {

inline void check_probability_list(std::span<const double> values, const char* what) {
  if (values.empty()) throw std::domain_error(std::string(what) + ": empty member list");
  for (double v : values)
    if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error(std::string(what) + ": entry outside [0,1]");
}

}  // namespace detail

/// OR-fusion missing probability. The head's own entry must carry a zero
/// reporting error.
inline double coalition_missing_probability(std::span<const double> member_miss,
                                            std::span<const double> member_report_err) {
  detail::check_probability_list(member_miss, "coalition_missing_probability");
  detail::check_probability_list(member_report_err, "coalition_missing_probability");
  if (member_miss.size() != member_report_err.size())
    throw std::domain_error("coalition_missing_probability: list lengths differ");
  double q = 1.0;
  for (std::size_t i = 0; i < member_miss.size(); ++i) {
    const double pm = member_miss[i];
    const double pe = member_report_err[i];
    q *= pm * (1.0 - pe) + (1.0 - pm) * pe;
  }
  return q;
}

inline double coalition_false_alarm_probability(double pf, std::span<const double> member_report_err) {
  if (!(pf >= 0.0 && pf <= 1.0)) throw std::domain_error("coalition_false_alarm_probability: pf outside [0,1]");
  detail::check_probability_list(member_report_err, "coalition_false_alarm_probability");
  double quiet = 1.0;
  for (double pe : member_report_err) quiet *= (1.0 - pf) * (1.0 - pe) + pf * pe;
  return std::min(1.0, std::max(0.0, 1.0 - quiet));
}

/// Threshold giving a non-cooperative false alarm of `pf_target`, found by
/// bisection on a bracket grown by doubling.
inline double lambda_for_target_pf(double pf_target, int m) {
  if (!(pf_target > 0.0 && pf_target < 1.0))
    throw std::domain_error("lambda_for_target_pf: target must lie in (0,1)");
  if (m < 1) throw std::domain_error("lambda_for_target_pf: m must be >= 1");

  double lo = 1e-12;
  double hi = 1.0;
  while (false_alarm_probability(hi, m) >= pf_target) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw std::domain_error("lambda_for_target_pf: target too small");
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 400; ++it) {
    mid = 0.5 * (lo + hi);
    const double p = false_alarm_probability(mid, m);
    if (std::abs(p - pf_target) <= 1e-13) break;
    if (p > pf_target)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= std::numeric_limits<double>::epsilon() * hi) break;
  }
  return mid;
}

}  // namespace coalsense
