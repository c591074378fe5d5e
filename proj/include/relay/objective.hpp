#pragma once

// Smooth-max machinery, the reciprocal-rate minimization cost and its
// per-step terms, and the exact-model throughput evaluator used for
// reporting and comparisons.

#include "relay/comms.hpp"
#include "relay/dynamics.hpp"

#include <limits>
#include <span>

namespace relay {

struct CostParams {
  int p_norm = 10;          // p of the p-norm smooth max
  double rate_floor = 1e-9; // lower bound on rates inside reciprocals

  void validate() const {
    if (p_norm < 1) throw std::domain_error("CostParams: p_norm must be >= 1");
    if (!(rate_floor > 0.0) || !std::isfinite(rate_floor)) {
      throw std::domain_error("CostParams: rate_floor must be > 0");
    }
  }
};

namespace detail {

// Deterministic integer power by binary exponentiation.
inline double int_pow(double base, int exp) {
  double result = 1.0;
  double b = base;
  int e = exp;
  while (e > 0) {
    if (e & 1) result *= b;
    b *= b;
    e >>= 1;
  }
  return result;
}

}  // namespace detail

/// p-norm smooth approximation of max over non-negative values,
/// (sum e_j^p)^(1/p). The largest element is factored out first so the
/// powers never overflow.
inline double smooth_max(std::span<const double> values, int p) {
  if (values.empty()) throw std::domain_error("smooth_max: empty list");
  if (p < 1) throw std::domain_error("smooth_max: p must be >= 1");
  double m = 0.0;
  for (double v : values) {
    if (!(v >= 0.0)) throw std::domain_error("smooth_max: negative entry");
    m = std::max(m, v);
  }
  if (m == 0.0) return 0.0;
  if (std::isinf(m)) return m;
  double sum = 0.0;
  for (double v : values) sum += detail::int_pow(v / m, p);
  return m * std::pow(sum, 1.0 / p);
}

/// One time step of the minimization cost: the smooth max of the two
/// reciprocal hop rates. Rates are floored so a dead link (SNR = 0) yields a
/// large finite cost instead of a division by zero.
inline double step_cost(double snr_bs, double snr_uav, const CostParams& params) {
  if (!(snr_bs >= 0.0) || !(snr_uav >= 0.0)) {
    throw std::domain_error("step_cost: SNRs must be >= 0");
  }
  const double rate_bs = std::max(normalized_rate(snr_bs), params.rate_floor);
  const double rate_uav = std::max(normalized_rate(snr_uav), params.rate_floor);
  const double recip[2] = {1.0 / rate_bs, 1.0 / rate_uav};
  return smooth_max(std::span<const double>(recip), params.p_norm);
}

/// Attitude of a knot: the stored channel when present, otherwise the
/// flat-multirotor reconstruction from the acceleration channel.
inline Attitude knot_attitude(const TrajectoryKnot& knot,
                              double gravity = kDefaultGravity) {
  if (knot.attitude) return *knot.attitude;
  return attitude_from_acceleration(knot.acceleration, gravity);
}

/// Sum of step costs over a shared time grid. Under the quadratic surrogate
/// the relay attitude is held at hover (the optimization-time convention);
/// the peer attitude always comes from its trajectory (stored or
/// reconstructed). Under the pattern-agnostic model attitudes are irrelevant.
inline double trajectory_cost(const Trajectory& relay, const Trajectory& peer,
                              const Vec3& bs, const LinkBudget& budget,
                              GainModel model, const CostParams& params,
                              double gravity = kDefaultGravity) {
  if (!relay.same_grid(peer)) {
    throw std::domain_error("trajectory_cost: trajectories use different time grids");
  }
  if (relay.knots.size() < 2) {
    throw std::domain_error("trajectory_cost: trajectory needs at least 2 knots");
  }
  const Attitude hover{};
  double total = 0.0;
  for (std::size_t k = 0; k < relay.knots.size(); ++k) {
    Attitude relay_att = hover;
    Attitude peer_att = hover;
    if (model == GainModel::QuadraticSurrogate) {
      peer_att = knot_attitude(peer.knots[k], gravity);
    } else if (model == GainModel::Exact) {
      relay_att = knot_attitude(relay.knots[k], gravity);
      peer_att = knot_attitude(peer.knots[k], gravity);
    }
    const LinkSnrs snrs = link_snrs(relay.knots[k].position, relay_att,
                                    peer.knots[k].position, peer_att, bs,
                                    budget, model);
    total += step_cost(snrs.snr_bs, snrs.snr_uav, params);
  }
  return total;
}

struct ThroughputSummary {
  double total_bits = 0.0;  // sum over knots of the bottleneck rate
  double min_rate = 0.0;    // worst instantaneous bottleneck rate
  std::vector<LinkSample> trace;
};

/// Exact-model replay of a relay trajectory against a peer trajectory:
/// per-step SNRs and rates for both hops under the full dipole pattern with
/// tilted antennas, plus the total and minimum bottleneck rates.
inline ThroughputSummary exact_throughput(const Trajectory& relay,
                                          const Trajectory& peer, const Vec3& bs,
                                          const LinkBudget& budget,
                                          double gravity = kDefaultGravity) {
  if (!relay.same_grid(peer)) {
    throw std::domain_error("exact_throughput: trajectories use different time grids");
  }
  if (relay.knots.size() < 2) {
    throw std::domain_error("exact_throughput: trajectory needs at least 2 knots");
  }
  ThroughputSummary out;
  out.trace.reserve(relay.knots.size());
  out.min_rate = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < relay.knots.size(); ++k) {
    const Attitude relay_att = knot_attitude(relay.knots[k], gravity);
    const Attitude peer_att = knot_attitude(peer.knots[k], gravity);
    const LinkSnrs snrs =
        link_snrs(relay.knots[k].position, relay_att, peer.knots[k].position,
                  peer_att, bs, budget, GainModel::Exact);
    const LinkSample sample = make_link_sample(relay.knots[k].t, snrs);
    out.total_bits += sample.rate_end_to_end;
    out.min_rate = std::min(out.min_rate, sample.rate_end_to_end);
    out.trace.push_back(sample);
  }
  return out;
}

}  // namespace relay
