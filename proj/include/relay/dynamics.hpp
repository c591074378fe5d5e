#pragma once

// Quintic motion primitives: closed-form minimum-jerk segments between fully
// specified per-axis boundary states, segment sampling, and kinematic
// feasibility audits of sampled trajectories.

#include "relay/geometry.hpp"

#include <optional>
#include <vector>

namespace relay {

struct AxisState {
  double p = 0.0;  // m
  double v = 0.0;  // m/s
  double a = 0.0;  // m/s^2
};

// p(t) = alpha/120 t^5 + beta/24 t^4 + gamma/6 t^3 + a0/2 t^2 + v0 t + p0.
// The t^2 term carries the factor 1/2 so the velocity and acceleration rows
// are exact derivatives of the position row.
struct QuinticSegment {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  AxisState start;
  double duration = 0.0;  // s, > 0
};

struct TrajectoryKnot {
  double t = 0.0;  // s
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
  std::optional<Attitude> attitude;
};

/// Uniformly sampled state sequence for one vehicle; knot k sits at t = k*ts.
struct Trajectory {
  std::vector<TrajectoryKnot> knots;
  double ts = 0.0;  // sampling period, s

  int segments() const { return static_cast<int>(knots.size()) - 1; }
  double duration() const { return ts * segments(); }

  bool same_grid(const Trajectory& other) const {
    return knots.size() == other.knots.size() && ts == other.ts;
  }
  bool has_attitudes() const {
    if (knots.empty()) return false;
    for (const auto& k : knots) {
      if (!k.attitude) return false;
    }
    return true;
  }
};

/// Minimum-jerk quintic joining `start` to `end` in `duration` seconds; the
/// boundary states are met exactly (see the endpoint-exactness tests).
inline QuinticSegment min_jerk_coefficients(const AxisState& start,
                                            const AxisState& end,
                                            double duration) {
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw std::domain_error("min_jerk_coefficients: duration must be > 0");
  }
  const double T = duration;
  const double T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
  const double dp = end.p - start.p - start.v * T - 0.5 * start.a * T2;
  const double dv = end.v - start.v - start.a * T;
  const double da = end.a - start.a;
  QuinticSegment seg;
  seg.alpha = (720.0 * dp - 360.0 * T * dv + 60.0 * T2 * da) / T5;
  seg.beta = (-360.0 * T * dp + 168.0 * T2 * dv - 24.0 * T3 * da) / T5;
  seg.gamma = (60.0 * T2 * dp - 24.0 * T3 * dv + 3.0 * T4 * da) / T5;
  seg.start = start;
  seg.duration = duration;
  return seg;
}

/// Evaluate position, velocity and acceleration of a segment at local time t.
inline AxisState sample_segment(const QuinticSegment& seg, double t) {
  if (!(t >= 0.0 && t <= seg.duration)) {
    throw std::domain_error("sample_segment: t outside [0, duration]");
  }
  const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
  AxisState out;
  out.p = seg.alpha / 120.0 * t5 + seg.beta / 24.0 * t4 + seg.gamma / 6.0 * t3 +
          0.5 * seg.start.a * t2 + seg.start.v * t + seg.start.p;
  out.v = seg.alpha / 24.0 * t4 + seg.beta / 6.0 * t3 + seg.gamma / 2.0 * t2 +
          seg.start.a * t + seg.start.v;
  out.a = seg.alpha / 6.0 * t3 + seg.beta / 2.0 * t2 + seg.gamma * t +
          seg.start.a;
  return out;
}

enum class LimitKind { Velocity, Acceleration };

struct LimitViolation {
  int knot = 0;  // left knot of the offending segment
  int axis = 0;  // 0..2
  LimitKind kind = LimitKind::Velocity;
  double value = 0.0;   // worst sampled value (signed)
  double excess = 0.0;  // |value| - limit
};

struct FeasibilityReport {
  std::vector<LimitViolation> violations;
  double max_violation = 0.0;
  bool feasible() const { return violations.empty(); }
};

/// Reconstruct every inter-knot minimum-jerk segment, sample it at
/// intra_samples + 2 equispaced points (endpoints included), and report the
/// worst per-segment/axis excess over the velocity and acceleration limits.
/// An empty report means the trajectory is feasible within 1e-6.
inline FeasibilityReport feasibility_audit(const Trajectory& traj,
                                           const Vec3& v_max, const Vec3& a_max,
                                           int intra_samples = 4) {
  if (traj.knots.size() < 2) {
    throw std::domain_error("feasibility_audit: trajectory needs at least 2 knots");
  }
  if (intra_samples < 0) {
    throw std::domain_error("feasibility_audit: intra_samples must be >= 0");
  }
  constexpr double tol = 1e-6;
  const int samples = intra_samples + 2;
  FeasibilityReport report;
  for (int k = 0; k + 1 < static_cast<int>(traj.knots.size()); ++k) {
    const TrajectoryKnot& a = traj.knots[k];
    const TrajectoryKnot& b = traj.knots[k + 1];
    for (int axis = 0; axis < 3; ++axis) {
      const AxisState s0{a.position[axis], a.velocity[axis], a.acceleration[axis]};
      const AxisState s1{b.position[axis], b.velocity[axis], b.acceleration[axis]};
      const QuinticSegment seg = min_jerk_coefficients(s0, s1, traj.ts);
      double worst_v = 0.0, worst_v_val = 0.0;
      double worst_a = 0.0, worst_a_val = 0.0;
      for (int i = 0; i < samples; ++i) {
        const double t =
            (i == samples - 1) ? seg.duration : seg.duration * i / (samples - 1);
        const AxisState s = sample_segment(seg, t);
        if (std::abs(s.v) > worst_v) {
          worst_v = std::abs(s.v);
          worst_v_val = s.v;
        }
        if (std::abs(s.a) > worst_a) {
          worst_a = std::abs(s.a);
          worst_a_val = s.a;
        }
      }
      if (worst_v > v_max[axis] + tol) {
        report.violations.push_back(
            {k, axis, LimitKind::Velocity, worst_v_val, worst_v - v_max[axis]});
      }
      if (worst_a > a_max[axis] + tol) {
        report.violations.push_back(
            {k, axis, LimitKind::Acceleration, worst_a_val, worst_a - a_max[axis]});
      }
    }
  }
  for (const auto& v : report.violations) {
    report.max_violation = std::max(report.max_violation, v.excess);
  }
  return report;
}

}  // namespace relay
