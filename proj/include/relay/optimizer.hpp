#pragma once

// Direct transcription of the relay planning problem onto knot states, with
// minimum-jerk quintic reconstruction between knots, solved by quadratic
// penalty rounds around an L-BFGS descent with Armijo backtracking.
// Gradients: structured central differences for the communications cost,
// closed-form derivatives for the penalty term. Deterministic for fixed
// inputs.

#include "relay/scenario_io.hpp"
#include "relay/solver_params.hpp"

#include <chrono>
#include <deque>
#include <limits>

namespace relay {

using VecX = Eigen::VectorXd;

// A returned iterate counts as feasible when its audit violation is below this.
inline constexpr double kFeasibleViolation = 1e-3;

struct SolveReport {
  Trajectory trajectory;
  std::vector<double> cost_history;  // penalized objective at accepted iterates
  std::vector<int> round_starts;     // index into cost_history per penalty round
  double final_cost = 0.0;           // unpenalized cost of the returned trajectory
  double max_constraint_violation = 0.0;
  int iterations_used = 0;
  double wall_time_s = 0.0;
  GainModel model_used = GainModel::QuadraticSurrogate;
  bool feasible = false;
};

/// Decision-vector layout: the relay knot states {p_k, v_k, a_k}, k = 1..N,
/// nine scaled variables per knot. Knot 0 is pinned to the scenario's start
/// position at rest, and the inter-knot motion is the minimum-jerk quintic,
/// so the dynamics hold by construction.
struct Transcription {
  int steps = 0;  // N
  double ts = 0.0;
  Vec3 start_position = Vec3::Zero();
  Vec3 scale_v = Vec3::Ones();  // velocity variables stored as v / scale_v
  Vec3 scale_a = Vec3::Ones();

  int variables() const { return 9 * steps; }

  Trajectory decode(const VecX& x) const {
    if (x.size() != variables()) {
      throw std::domain_error("Transcription: decision vector has wrong size");
    }
    Trajectory traj;
    traj.ts = ts;
    traj.knots.resize(steps + 1);
    traj.knots[0].t = 0.0;
    traj.knots[0].position = start_position;
    for (int k = 1; k <= steps; ++k) {
      const int base = 9 * (k - 1);
      TrajectoryKnot& knot = traj.knots[k];
      knot.t = ts * k;
      for (int j = 0; j < 3; ++j) {
        knot.position[j] = x[base + j];
        knot.velocity[j] = x[base + 3 + j] * scale_v[j];
        knot.acceleration[j] = x[base + 6 + j] * scale_a[j];
      }
    }
    return traj;
  }

  VecX encode(const Trajectory& traj) const {
    if (static_cast<int>(traj.knots.size()) != steps + 1) {
      throw std::domain_error("Transcription: trajectory has wrong knot count");
    }
    VecX x(variables());
    for (int k = 1; k <= steps; ++k) {
      const int base = 9 * (k - 1);
      const TrajectoryKnot& knot = traj.knots[k];
      for (int j = 0; j < 3; ++j) {
        x[base + j] = knot.position[j];
        x[base + 3 + j] = knot.velocity[j] / scale_v[j];
        x[base + 6 + j] = knot.acceleration[j] / scale_a[j];
      }
    }
    return x;
  }
};

inline Transcription transcribe(const Scenario& sc) {
  const int n = sc.peer.segments();
  if (n < 1 || !(sc.peer.ts > 0.0)) {
    throw std::domain_error("transcribe: degenerate scenario grid");
  }
  Transcription tr;
  tr.steps = n;
  tr.ts = sc.peer.ts;
  tr.start_position = sc.relay_start;
  tr.scale_v = sc.v_max;
  tr.scale_a = sc.a_max;
  return tr;
}

/// Initial relay trajectory on the peer grid. Hold keeps the start state;
/// MidpointTrack places knots at the BS/peer midpoint with finite-difference
/// velocity and acceleration channels clipped to the limits.
inline Trajectory initial_guess(const Scenario& sc, InitStrategy strategy) {
  const int n = sc.peer.segments();
  Trajectory traj;
  traj.ts = sc.peer.ts;
  traj.knots.resize(n + 1);
  for (int k = 0; k <= n; ++k) traj.knots[k].t = traj.ts * k;

  if (strategy == InitStrategy::Hold) {
    for (int k = 0; k <= n; ++k) traj.knots[k].position = sc.relay_start;
    return traj;
  }

  for (int k = 0; k <= n; ++k) {
    traj.knots[k].position = 0.5 * (sc.bs_position + sc.peer.knots[k].position);
  }
  auto fd = [&](auto&& value, int k) -> Vec3 {
    if (k == 0) return (value(1) - value(0)) / traj.ts;
    if (k == n) return (value(n) - value(n - 1)) / traj.ts;
    return (value(k + 1) - value(k - 1)) / (2.0 * traj.ts);
  };
  for (int k = 0; k <= n; ++k) {
    traj.knots[k].velocity = fd([&](int i) { return traj.knots[i].position; }, k);
  }
  for (int k = 0; k <= n; ++k) {
    traj.knots[k].acceleration = fd([&](int i) { return traj.knots[i].velocity; }, k);
  }
  for (int k = 0; k <= n; ++k) {
    for (int j = 0; j < 3; ++j) {
      traj.knots[k].velocity[j] =
          std::clamp(traj.knots[k].velocity[j], -sc.v_max[j], sc.v_max[j]);
      traj.knots[k].acceleration[j] =
          std::clamp(traj.knots[k].acceleration[j], -sc.a_max[j], sc.a_max[j]);
    }
  }
  return traj;
}

namespace detail {

// Rate-limit a guess from the pinned start state so the first penalty round
// does not begin astronomically infeasible: positions chase the guess at
// velocities reachable under the limits, per axis. The chase keeps a margin
// below the limits so the quintic reconstruction starts strictly interior
// instead of riding the penalty kink.
inline Trajectory clamp_reachable(const Trajectory& guess, const Vec3& start,
                                  const Vec3& v_max, const Vec3& a_max) {
  constexpr double margin = 0.85;
  Trajectory out = guess;
  Vec3 p_prev = start;
  Vec3 v_prev = Vec3::Zero();
  out.knots[0].position = start;
  out.knots[0].velocity = Vec3::Zero();
  out.knots[0].acceleration = Vec3::Zero();
  for (std::size_t k = 1; k < out.knots.size(); ++k) {
    TrajectoryKnot& knot = out.knots[k];
    for (int j = 0; j < 3; ++j) {
      const double dist = guess.knots[k].position[j] - p_prev[j];
      // stopping-distance cap so the chase brakes onto the target
      const double v_brake = std::sqrt(2.0 * margin * a_max[j] * std::abs(dist));
      double v_des = 2.0 * dist / guess.ts - v_prev[j];
      v_des = std::clamp(v_des, -v_brake, v_brake);
      const double lo = std::max(-margin * v_max[j], v_prev[j] - margin * a_max[j] * guess.ts);
      const double hi = std::min(margin * v_max[j], v_prev[j] + margin * a_max[j] * guess.ts);
      const double v_new = std::clamp(v_des, lo, hi);
      knot.acceleration[j] = (v_new - v_prev[j]) / guess.ts;
      knot.velocity[j] = v_new;
      // trapezoidal step keeps the segment close to a constant-acceleration arc
      knot.position[j] = p_prev[j] + 0.5 * (v_prev[j] + v_new) * guess.ts;
    }
    p_prev = knot.position;
    v_prev = knot.velocity;
  }
  // re-derive the channels with the solver's own finite-difference stencil so
  // the start sits on the kinematically consistent manifold it moves along
  const int n = static_cast<int>(out.knots.size()) - 1;
  auto stencil = [&](auto&& value, int k) -> Vec3 {
    if (k == 0) return Vec3::Zero();
    if (k == n) return (value(n) - value(n - 1)) / guess.ts;
    return (value(k + 1) - value(k - 1)) / (2.0 * guess.ts);
  };
  for (int k = 0; k <= n; ++k) {
    out.knots[k].velocity = stencil([&](int i) { return out.knots[i].position; }, k);
  }
  for (int k = 0; k <= n; ++k) {
    out.knots[k].acceleration = stencil([&](int i) { return out.knots[i].velocity; }, k);
  }
  for (int k = 0; k <= n; ++k) {
    for (int j = 0; j < 3; ++j) {
      out.knots[k].velocity[j] =
          std::clamp(out.knots[k].velocity[j], -margin * v_max[j], margin * v_max[j]);
      out.knots[k].acceleration[j] =
          std::clamp(out.knots[k].acceleration[j], -margin * a_max[j], margin * a_max[j]);
    }
  }
  return out;
}

// Bound penalty: quadratic with a C2 cubic shoulder of width kPenaltyShoulder
// starting just inside the limit, so converged iterates sit about one
// shoulder width inside the bounds and the penalized objective stays twice
// differentiable across the activation boundary.
inline constexpr double kPenaltyShoulder = 1e-3;

// s = excess + shoulder; zero for s <= 0.
inline double shoulder_penalty(double s) {
  if (s <= 0.0) return 0.0;
  if (s <= kPenaltyShoulder) return s * s * s / (3.0 * kPenaltyShoulder);
  return s * s - kPenaltyShoulder * s + kPenaltyShoulder * kPenaltyShoulder / 3.0;
}

inline double shoulder_penalty_slope(double s) {
  if (s <= 0.0) return 0.0;
  if (s <= kPenaltyShoulder) return s * s / kPenaltyShoulder;
  return 2.0 * s - kPenaltyShoulder;
}

// Quadratic-form gain factor for a precomputed attitude vector, clamped to
// [0, 1]. Matches approx_power_gain up to the D^2 normalization.
inline double quad_gain(const Vec7& g, const Vec3& d) {
  const double gv = g[0] + g[1] * d.x() * d.x() + g[2] * d.y() * d.y() +
                    g[3] * d.z() * d.z() + g[4] * d.x() * d.y() +
                    g[5] * d.x() * d.z() + g[6] * d.y() * d.z();
  return std::clamp(gv, 0.0, 1.0);
}

struct SolverWorkspace {
  std::vector<Vec3> pos, vel, acc;  // index 0 pinned to the start state
  std::vector<double> step_val;     // per-knot cost terms
  std::vector<double> seg_pen;      // per-segment sums of squared excesses
  std::vector<double> seg_maxex;    // per-segment worst excess
  double cost_steps = 0.0;
  double pen_sum = 0.0;
  double max_excess = 0.0;

  double penalized(double mu) const { return cost_steps + mu * pen_sum; }
};

// Cost + penalty evaluation decomposed into per-knot and per-segment atoms,
// so forward differences of a single variable only touch the affected atoms.
class PenaltyProblem {
 public:
  PenaltyProblem(const Scenario& sc, GainModel model, const SolverParams& params)
      : tr_(transcribe(sc)),
        model_(model),
        params_(params),
        bs_(sc.bs_position),
        budget_(sc.budget),
        cost_(sc.cost),
        v_max_(sc.v_max),
        a_max_(sc.a_max) {
    const int n = tr_.steps;
    peer_pos_.resize(n + 1);
    peer_g_.resize(n + 1, Vec7::Zero());
    for (int k = 0; k <= n; ++k) {
      peer_pos_[k] = sc.peer.knots[k].position;
      if (model_ == GainModel::QuadraticSurrogate) {
        peer_g_[k] = gain_attitude_vector(knot_attitude(sc.peer.knots[k], sc.gravity));
      }
    }
    hover_g_ = gain_attitude_vector(Attitude{});
  }

  const Transcription& transcription() const { return tr_; }
  int variables() const { return tr_.variables(); }

  void resize(SolverWorkspace& ws) const {
    const int n = tr_.steps;
    ws.pos.assign(n + 1, Vec3::Zero());
    ws.vel.assign(n + 1, Vec3::Zero());
    ws.acc.assign(n + 1, Vec3::Zero());
    ws.pos[0] = tr_.start_position;
    ws.step_val.assign(n + 1, 0.0);
    ws.seg_pen.assign(n, 0.0);
    ws.seg_maxex.assign(n, 0.0);
  }

  double step_atom(int k, const Vec3& p) const {
    const Vec3 to_bs = bs_ - p;
    const Vec3 to_peer = peer_pos_[k] - p;
    const double r2_bs = to_bs.squaredNorm();
    const double r2_peer = to_peer.squaredNorm();
    if (r2_bs < 1e-24 || r2_peer < 1e-24) {
      return std::numeric_limits<double>::infinity();
    }
    double gamma_bs = 1.0;
    double gamma_peer = 1.0;
    if (model_ == GainModel::QuadraticSurrogate) {
      const Vec3 d_bs = to_bs / std::sqrt(r2_bs);
      const Vec3 d_peer = to_peer / std::sqrt(r2_peer);
      gamma_bs = quad_gain(hover_g_, d_bs);
      gamma_peer = quad_gain(hover_g_, d_peer) * quad_gain(peer_g_[k], d_peer);
    }
    const double snr_bs = budget_.k_relay_bs * gamma_bs / r2_bs;
    const double snr_uav = budget_.k_uav_uav * gamma_peer / r2_peer;
    return step_cost(snr_bs, snr_uav, cost_);
  }

  // Mirrors the sampling grid of feasibility_audit so penalty and audit agree.
  void seg_atom(const SolverWorkspace& ws, int i, double* pen, double* maxex) const {
    const int samples = params_.intra_samples + 2;
    double pen_acc = 0.0;
    double worst = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
      const AxisState s0{ws.pos[i][axis], ws.vel[i][axis], ws.acc[i][axis]};
      const AxisState s1{ws.pos[i + 1][axis], ws.vel[i + 1][axis], ws.acc[i + 1][axis]};
      const QuinticSegment seg = min_jerk_coefficients(s0, s1, tr_.ts);
      for (int s = 0; s < samples; ++s) {
        const double t =
            (s == samples - 1) ? seg.duration : seg.duration * s / (samples - 1);
        const AxisState st = sample_segment(seg, t);
        const double ev = std::abs(st.v) - v_max_[axis];
        pen_acc += shoulder_penalty(ev + kPenaltyShoulder);
        if (ev > 0.0) worst = std::max(worst, ev);
        const double ea = std::abs(st.a) - a_max_[axis];
        pen_acc += shoulder_penalty(ea + kPenaltyShoulder);
        if (ea > 0.0) worst = std::max(worst, ea);
      }
    }
    *pen = pen_acc;
    *maxex = worst;
  }

  // Exact derivative of the sampled shoulder penalty with respect to the 6
  // endpoint states of one axis, chained through the closed-form quintic
  // coefficients. The penalty term needs exact derivatives: its curvature
  // grows with the weight, beyond what a finite-difference step can resolve.
  //
  // out layout: d/d{p,v,a} of knot i in [0..2], of knot i+1 in [3..5].
  void seg_gradient_axis(const AxisState& s0, const AxisState& s1, int axis,
                         double out[6]) const {
    for (int m = 0; m < 6; ++m) out[m] = 0.0;
    const double T = tr_.ts;
    const double T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
    const QuinticSegment seg = min_jerk_coefficients(s0, s1, T);
    const int samples = params_.intra_samples + 2;
    for (int s = 0; s < samples; ++s) {
      const double t = (s == samples - 1) ? T : T * s / (samples - 1);
      const AxisState st = sample_segment(seg, t);
      const double sv = std::abs(st.v) - v_max_[axis] + kPenaltyShoulder;
      const double sa = std::abs(st.a) - a_max_[axis] + kPenaltyShoulder;
      if (sv <= 0.0 && sa <= 0.0) continue;
      const double gv = shoulder_penalty_slope(sv) * (st.v < 0.0 ? -1.0 : 1.0);
      const double ga = shoulder_penalty_slope(sa) * (st.a < 0.0 ? -1.0 : 1.0);

      const double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
      // sensitivities of v(t), a(t) to the boundary deltas (dp, dv, da)
      const double dv_dDp = (30.0 * t4 - 60.0 * T * t3 + 30.0 * T2 * t2) / T5;
      const double dv_dDv = (-15.0 * T * t4 + 28.0 * T2 * t3 - 12.0 * T3 * t2) / T5;
      const double dv_dDa = (2.5 * T2 * t4 - 4.0 * T3 * t3 + 1.5 * T4 * t2) / T5;
      const double da_dDp = (120.0 * t3 - 180.0 * T * t2 + 60.0 * T2 * t) / T5;
      const double da_dDv = (-60.0 * T * t3 + 84.0 * T2 * t2 - 24.0 * T3 * t) / T5;
      const double da_dDa = (10.0 * T2 * t3 - 12.0 * T3 * t2 + 3.0 * T4 * t) / T5;

      // chain through dp = p1-p0-v0 T-a0 T^2/2, dv = v1-v0-a0 T, da = a1-a0,
      // plus the explicit v0/a0 terms of the quintic rows
      const double dv_dp0 = -dv_dDp;
      const double dv_dv0 = -T * dv_dDp - dv_dDv + 1.0;
      const double dv_da0 = -0.5 * T2 * dv_dDp - T * dv_dDv - dv_dDa + t;
      const double da_dp0 = -da_dDp;
      const double da_dv0 = -T * da_dDp - da_dDv;
      const double da_da0 = -0.5 * T2 * da_dDp - T * da_dDv - da_dDa + 1.0;

      out[0] += gv * dv_dp0 + ga * da_dp0;
      out[1] += gv * dv_dv0 + ga * da_dv0;
      out[2] += gv * dv_da0 + ga * da_da0;
      out[3] += gv * dv_dDp + ga * da_dDp;
      out[4] += gv * dv_dDv + ga * da_dDv;
      out[5] += gv * dv_dDa + ga * da_dDa;
    }
  }

  void unpack(const VecX& x, SolverWorkspace& ws) const {
    for (int k = 1; k <= tr_.steps; ++k) {
      const int base = 9 * (k - 1);
      for (int j = 0; j < 3; ++j) {
        ws.pos[k][j] = x[base + j];
        ws.vel[k][j] = x[base + 3 + j] * tr_.scale_v[j];
        ws.acc[k][j] = x[base + 6 + j] * tr_.scale_a[j];
      }
    }
  }

  void full_eval(const VecX& x, SolverWorkspace& ws) const {
    unpack(x, ws);
    ws.cost_steps = 0.0;
    ws.pen_sum = 0.0;
    ws.max_excess = 0.0;
    for (int k = 0; k <= tr_.steps; ++k) {
      ws.step_val[k] = step_atom(k, ws.pos[k]);
      ws.cost_steps += ws.step_val[k];
    }
    for (int i = 0; i < tr_.steps; ++i) {
      seg_atom(ws, i, &ws.seg_pen[i], &ws.seg_maxex[i]);
      ws.pen_sum += ws.seg_pen[i];
      ws.max_excess = std::max(ws.max_excess, ws.seg_maxex[i]);
    }
  }

  // Descent runs in the reduced space of knot position deltas: the cost
  // reads positions only, and the quintic reconstruction ties velocity and
  // acceleration to them, so feasible moves are position fields with
  // matching derivative channels. lift() maps a reduced direction to a
  // full-space one with finite-difference-consistent velocity/acceleration
  // deltas; reduce() is its adjoint, pulling the full gradient back.
  //
  // The stencil: central differences inside the grid, one-sided at the
  // tail, and a pinned (zero-delta) knot 0.
  VecX lift(const VecX& reduced) const {
    const int n = tr_.steps;
    const double ts = tr_.ts;
    VecX full(9 * n);
    std::vector<double> dp(static_cast<std::size_t>(n) + 1);
    std::vector<double> dv(static_cast<std::size_t>(n) + 1);
    for (int axis = 0; axis < 3; ++axis) {
      dp[0] = 0.0;  // knot 0 pinned
      for (int k = 1; k <= n; ++k) dp[k] = reduced[3 * (k - 1) + axis];
      dv[0] = 0.0;
      for (int k = 1; k <= n; ++k) {
        dv[k] = (k == n) ? (dp[n] - dp[n - 1]) / ts
                         : (dp[k + 1] - dp[k - 1]) / (2.0 * ts);
      }
      for (int k = 1; k <= n; ++k) {
        const double da = (k == n) ? (dv[n] - dv[n - 1]) / ts
                                   : (dv[k + 1] - dv[k - 1]) / (2.0 * ts);
        const int base = 9 * (k - 1);
        full[base + axis] = dp[k];
        full[base + 3 + axis] = dv[k] / tr_.scale_v[axis];
        full[base + 6 + axis] = da / tr_.scale_a[axis];
      }
    }
    return full;
  }

  VecX reduce(const VecX& full) const {
    const int n = tr_.steps;
    const double ts = tr_.ts;
    VecX reduced = VecX::Zero(3 * n);
    std::vector<double> gv(static_cast<std::size_t>(n) + 1);
    std::vector<double> ga(static_cast<std::size_t>(n) + 1);
    for (int axis = 0; axis < 3; ++axis) {
      for (int k = 1; k <= n; ++k) {
        const int base = 9 * (k - 1);
        gv[k] = full[base + 3 + axis] / tr_.scale_v[axis];
        ga[k] = full[base + 6 + axis] / tr_.scale_a[axis];
      }
      gv[0] = ga[0] = 0.0;
      // adjoint of the acceleration stencil: accumulate into the velocity bar
      std::vector<double> vbar(static_cast<std::size_t>(n) + 1, 0.0);
      for (int k = 1; k <= n; ++k) {
        if (k == n) {
          vbar[n] += ga[n] / ts;
          vbar[n - 1] -= ga[n] / ts;
        } else {
          vbar[k + 1] += ga[k] / (2.0 * ts);
          vbar[k - 1] -= ga[k] / (2.0 * ts);
        }
      }
      for (int k = 1; k <= n; ++k) vbar[k] += gv[k];
      // adjoint of the velocity stencil: accumulate into the position bar
      std::vector<double> pbar(static_cast<std::size_t>(n) + 1, 0.0);
      for (int k = 1; k <= n; ++k) {
        if (k == n) {
          pbar[n] += vbar[n] / ts;
          pbar[n - 1] -= vbar[n] / ts;
        } else {
          pbar[k + 1] += vbar[k] / (2.0 * ts);
          pbar[k - 1] -= vbar[k] / (2.0 * ts);
        }
      }
      for (int k = 1; k <= n; ++k) {
        reduced[3 * (k - 1) + axis] = full[9 * (k - 1) + axis] + pbar[k];
      }
    }
    return reduced;
  }

  // Communications cost by structured central differences (only the affected
  // step atom is re-evaluated), plus the exact penalty derivative. Central
  // differences preserve the reflection symmetries of symmetric scenarios
  // exactly, so mirrored geometries solve identically. ws must hold the
  // evaluated state of the current iterate.
  void gradient(SolverWorkspace& ws, double mu, VecX& grad) const {
    grad.setZero();
    const double h = params_.fd_step;
    for (int k = 1; k <= tr_.steps; ++k) {
      const int base = 9 * (k - 1);
      for (int axis = 0; axis < 3; ++axis) {
        const double saved = ws.pos[k][axis];
        ws.pos[k][axis] = saved + h;  // position scale is 1 m
        const double up = step_atom(k, ws.pos[k]);
        ws.pos[k][axis] = saved - h;
        const double down = step_atom(k, ws.pos[k]);
        ws.pos[k][axis] = saved;
        grad[base + axis] = (up - down) / (2.0 * h);
      }
    }
    double dseg[6];
    for (int i = 0; i < tr_.steps; ++i) {
      for (int axis = 0; axis < 3; ++axis) {
        const AxisState s0{ws.pos[i][axis], ws.vel[i][axis], ws.acc[i][axis]};
        const AxisState s1{ws.pos[i + 1][axis], ws.vel[i + 1][axis], ws.acc[i + 1][axis]};
        seg_gradient_axis(s0, s1, axis, dseg);
        if (i >= 1) {  // knot 0 is pinned, not a variable
          const int base = 9 * (i - 1);
          grad[base + axis] += mu * dseg[0];
          grad[base + 3 + axis] += mu * dseg[1] * tr_.scale_v[axis];
          grad[base + 6 + axis] += mu * dseg[2] * tr_.scale_a[axis];
        }
        const int base = 9 * i;
        grad[base + axis] += mu * dseg[3];
        grad[base + 3 + axis] += mu * dseg[4] * tr_.scale_v[axis];
        grad[base + 6 + axis] += mu * dseg[5] * tr_.scale_a[axis];
      }
    }
  }

 private:
  Transcription tr_;
  GainModel model_;
  SolverParams params_;
  Vec3 bs_;
  LinkBudget budget_;
  CostParams cost_;
  Vec3 v_max_, a_max_;
  std::vector<Vec3> peer_pos_;
  std::vector<Vec7> peer_g_;
  Vec7 hover_g_;
};

// Initial inverse-Hessian model for the reduced space:
// H0 = (I + kappa * D2^T D2)^(-1) per axis, with D2 the second-difference
// stencil over the knot position field (knot 0 pinned). Where the bound
// penalty is active it is a quadratic in the second differences with
// curvature ~ 2 mu samples / ts^4, so this centers L-BFGS near Newton
// scaling on rough modes while whole-trajectory translations keep full
// stride.
class SmoothingPreconditioner {
 public:
  void factor(int n, double kappa) {
    n_ = n;
    // bands of A = I + kappa * M^T M, with M the second-difference stencil
    // over the deltas of knots 1..N (knot 0 pinned, one-sided last row)
    std::vector<double> a0(n, 1.0), a1(n, 0.0), a2(n, 0.0);
    auto add_row = [&](std::initializer_list<std::pair<int, double>> entries) {
      for (const auto& [ci, wi] : entries) {
        for (const auto& [cj, wj] : entries) {
          if (cj < ci) continue;
          const double v = kappa * wi * wj;
          if (cj == ci) {
            a0[ci] += v;
          } else if (cj == ci + 1) {
            a1[ci] += v;
          } else {
            a2[ci] += v;
          }
        }
      }
    };
    for (int k = 0; k < n; ++k) {
      if (k == 0) {
        if (n > 1) add_row({{0, -2.0}, {1, 1.0}});  // pinned virtual neighbor
      } else if (k == n - 1) {
        add_row({{k - 1, 1.0}, {k, -1.0}});
      } else {
        add_row({{k - 1, 1.0}, {k, -2.0}, {k + 1, 1.0}});
      }
    }

    // LDL^T with bandwidth 2:
    //   l2[i] = a2[i-2] / d[i-2]
    //   l1[i] = (a1[i-1] - l2[i] l1[i-1] d[i-2]) / d[i-1]
    //   d[i]  = a0[i] - l1[i]^2 d[i-1] - l2[i]^2 d[i-2]
    d_.assign(n, 0.0);
    l1_.assign(n, 0.0);
    l2_.assign(n, 0.0);
    for (int i = 0; i < n_; ++i) {
      const double L2 = (i >= 2) ? a2[i - 2] / d_[i - 2] : 0.0;
      const double L1 =
          (i >= 1) ? (a1[i - 1] - ((i >= 2) ? L2 * l1_[i - 1] * d_[i - 2] : 0.0)) / d_[i - 1]
                   : 0.0;
      l2_[i] = L2;
      l1_[i] = L1;
      d_[i] = a0[i] - ((i >= 1) ? L1 * L1 * d_[i - 1] : 0.0) -
              ((i >= 2) ? L2 * L2 * d_[i - 2] : 0.0);
    }
  }

  // z = A^{-1} g applied independently to the three interleaved axes
  VecX apply(const VecX& g) const {
    VecX z(g.size());
    std::vector<double> rhs(n_);
    for (int axis = 0; axis < 3; ++axis) {
      for (int k = 0; k < n_; ++k) rhs[k] = g[3 * k + axis];
      solve(rhs);
      for (int k = 0; k < n_; ++k) z[3 * k + axis] = rhs[k];
    }
    return z;
  }

 private:
  void solve(std::vector<double>& b) const {
    for (int i = 0; i < n_; ++i) {  // L y = b, unit diagonal
      if (i >= 1) b[i] -= l1_[i] * b[i - 1];
      if (i >= 2) b[i] -= l2_[i] * b[i - 2];
    }
    for (int i = 0; i < n_; ++i) b[i] /= d_[i];
    for (int i = n_ - 1; i >= 0; --i) {  // L^T x = y
      if (i + 1 < n_) b[i] -= l1_[i + 1] * b[i + 1];
      if (i + 2 < n_) b[i] -= l2_[i + 2] * b[i + 2];
    }
  }

  int n_ = 0;
  std::vector<double> d_, l1_, l2_;
};

struct LbfgsMemory {
  std::deque<VecX> s, y;
  std::deque<double> rho;

  void clear() {
    s.clear();
    y.clear();
    rho.clear();
  }

  void push(VecX s_new, VecX y_new) {
    const double sy = s_new.dot(y_new);
    if (!(sy > 1e-12 * s_new.norm() * y_new.norm())) return;  // curvature guard
    s.push_back(std::move(s_new));
    y.push_back(std::move(y_new));
    rho.push_back(1.0 / sy);
    if (s.size() > 8) {
      s.pop_front();
      y.pop_front();
      rho.pop_front();
    }
  }

  // Two-loop recursion around the smoothing center; returns -H g.
  VecX direction(const VecX& g, const SmoothingPreconditioner& center) const {
    VecX q = g;
    const int m = static_cast<int>(s.size());
    std::vector<double> alpha(m);
    for (int i = m - 1; i >= 0; --i) {
      alpha[i] = rho[i] * s[i].dot(q);
      q -= alpha[i] * y[i];
    }
    q = center.apply(q);
    for (int i = 0; i < m; ++i) {
      const double beta = rho[i] * y[i].dot(q);
      q += s[i] * (alpha[i] - beta);
    }
    return -q;
  }
};

}  // namespace detail

/// Minimize the surrogate trajectory cost subject to velocity/acceleration
/// bounds via quadratic penalty rounds around L-BFGS descent. Returns the
/// best iterate whose audit violation stays below 1e-3, or the final iterate
/// with its violation report when none qualifies.
inline SolveReport solve(const Scenario& sc, GainModel model,
                         const SolverParams& params,
                         InitStrategy init = InitStrategy::MidpointTrack) {
  if (model == GainModel::Exact) {
    throw std::domain_error("solve: optimization supports the surrogate and pattern-agnostic models only");
  }
  params.validate();
  const auto t_start = std::chrono::steady_clock::now();

  const detail::PenaltyProblem problem(sc, model, params);
  const Transcription& tr = problem.transcription();

  VecX x = tr.encode(detail::clamp_reachable(initial_guess(sc, init),
                                             tr.start_position, sc.v_max, sc.a_max));
  detail::SolverWorkspace ws, ws_trial;
  problem.resize(ws);
  problem.resize(ws_trial);
  problem.full_eval(x, ws);

  if (!std::isfinite(ws.cost_steps) || !std::isfinite(ws.pen_sum)) {
    int bad = -1;
    for (int k = 0; k < static_cast<int>(ws.step_val.size()); ++k) {
      if (!std::isfinite(ws.step_val[k])) {
        bad = k;
        break;
      }
    }
    throw std::runtime_error(
        "solve: cost is not finite at the initial guess (step " +
        std::to_string(bad) + "); relay position coincides with an endpoint");
  }

  SolveReport report;
  report.model_used = model;

  VecX best_x = x;
  double best_cost = std::numeric_limits<double>::infinity();
  bool have_best = false;
  auto consider = [&](const VecX& cand, const detail::SolverWorkspace& w) {
    if (w.max_excess <= kFeasibleViolation && w.cost_steps < best_cost) {
      best_cost = w.cost_steps;
      best_x = cand;
      have_best = true;
    }
  };
  consider(x, ws);

  VecX grad_full(tr.variables());
  detail::LbfgsMemory memory;

  detail::SmoothingPreconditioner center;

  double mu = params.penalty_init;
  for (int round = 0; round < params.penalty_rounds; ++round) {
    memory.clear();
    center.factor(tr.steps,
                  2.0 * mu * (params.intra_samples + 2) / std::pow(tr.ts, 4));
    double f = ws.penalized(mu);
    report.round_starts.push_back(static_cast<int>(report.cost_history.size()));
    report.cost_history.push_back(f);
    std::vector<double> round_hist{f};
    problem.gradient(ws, mu, grad_full);
    VecX grad = problem.reduce(grad_full);

    int round_iters = 0;
    while (round_iters < params.max_iters) {
      if (grad.lpNorm<Eigen::Infinity>() < 1e-12) break;
      VecX dir = memory.direction(grad, center);
      double gd = grad.dot(dir);
      if (!(gd < 0.0) || !dir.allFinite()) {
        dir = -grad;
        gd = -grad.squaredNorm();
      }
      if (memory.s.empty()) {
        const double gnorm = dir.norm();
        if (gnorm > 1.0) {
          dir /= gnorm;
          gd /= gnorm;
        }
      }
      const VecX dir_full = problem.lift(dir);

      // Armijo backtracking, factor 0.5, c1 = 1e-4; first acceptable step wins.
      double step = 1.0;
      bool accepted = false;
      double f_new = f;
      for (int ls = 0; ls < 60; ++ls) {
        const VecX x_trial = x + step * dir_full;
        problem.full_eval(x_trial, ws_trial);
        f_new = ws_trial.penalized(mu);
        if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * gd) {
          x = x_trial;
          std::swap(ws, ws_trial);
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;

      ++round_iters;
      ++report.iterations_used;
      report.cost_history.push_back(f_new);
      round_hist.push_back(f_new);
      consider(x, ws);

      problem.gradient(ws, mu, grad_full);
      VecX grad_new = problem.reduce(grad_full);
      memory.push(step * dir, grad_new - grad);
      grad.swap(grad_new);
      f = f_new;

      // Stall rule: relative progress below tol over the last 10 iterates.
      const std::size_t m = round_hist.size();
      if (m >= 11) {
        const double ref = round_hist[m - 11];
        if (ref - round_hist[m - 1] < params.tol * std::max(1.0, std::abs(ref))) break;
      }
    }
    mu *= params.penalty_growth;
  }

  const VecX& x_final = have_best ? best_x : x;
  Trajectory traj = tr.decode(x_final);
  for (auto& knot : traj.knots) {
    try {
      knot.attitude = attitude_from_acceleration(knot.acceleration, sc.gravity);
    } catch (const std::domain_error&) {
      knot.attitude.reset();  // unphysical acceleration on an infeasible iterate
    }
  }

  const FeasibilityReport audit =
      feasibility_audit(traj, sc.v_max, sc.a_max, params.intra_samples);
  report.trajectory = std::move(traj);
  report.max_constraint_violation = audit.max_violation;
  report.feasible = audit.max_violation <= kFeasibleViolation;
  report.final_cost = trajectory_cost(report.trajectory, sc.peer, sc.bs_position,
                                      sc.budget, model, sc.cost, sc.gravity);
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

}  // namespace relay
