#pragma once

// Half-wave dipole gains, the quadratic-form gain surrogate, and per-hop
// SNRs / normalized bit rates for the relay's two links.

#include "relay/geometry.hpp"

namespace relay {

inline constexpr double kHalfWaveDipoleDirectivity = 1.64;

/// How antenna gain factors enter the link SNRs.
enum class GainModel {
  Exact,               // full dipole pattern with tilted antennas
  QuadraticSurrogate,  // cos^2 quadratic-form gains, relay antenna at hover
  PatternAgnostic,     // every gain factor replaced by 1
};

/// Lumped link budgets: SNR = k * gain_factor / distance^2. The base-station
/// side of the relay->BS hop is a tracking beam whose constant gain is folded
/// into k_relay_bs.
struct LinkBudget {
  double k_relay_bs = 0.0;  // D_B^2 D^2 P / sigma_BS^2, dimensionless * m^2
  double k_uav_uav = 0.0;   // D^4 P / sigma_relay^2
  double dipole_directivity = kHalfWaveDipoleDirectivity;

  void validate() const {
    if (!(k_relay_bs > 0.0) || !std::isfinite(k_relay_bs)) {
      throw std::domain_error("LinkBudget: k_relay_bs must be > 0");
    }
    if (!(k_uav_uav > 0.0) || !std::isfinite(k_uav_uav)) {
      throw std::domain_error("LinkBudget: k_uav_uav must be > 0");
    }
    if (!(dipole_directivity > 0.0) || !std::isfinite(dipole_directivity)) {
      throw std::domain_error("LinkBudget: dipole_directivity must be > 0");
    }
  }
};

/// Field gain of a half-wave dipole at angle theta from its axis,
/// D cos(pi/2 cos(theta)) / sin(theta). The removable singularities at the
/// axis (sin(theta) < 1e-9) evaluate to the analytic limit 0.
inline double dipole_gain(double theta_axis,
                          double directivity = kHalfWaveDipoleDirectivity) {
  if (!(theta_axis >= 0.0 && theta_axis <= kPi)) {
    throw std::domain_error("dipole_gain: angle outside [0, pi]");
  }
  const double s = std::sin(theta_axis);
  if (s < 1e-9) return 0.0;
  return directivity * std::cos(0.5 * kPi * std::cos(theta_axis)) / s;
}

/// Attitude half of the quadratic gain form (yaw-zero form). Together with
/// direction_quadratic_vector, g.v equals the squared norm of the unit link
/// direction's projection onto the antenna's broadside plane.
inline Vec7 gain_attitude_vector(const Attitude& att) {
  const double sp = std::sin(att.pitch), cp = std::cos(att.pitch);
  const double sr = std::sin(att.roll), cr = std::cos(att.roll);
  Vec7 g;
  g << 1.0,
      -sp * sp,
      -cp * cp * sr * sr,
      -cr * cr * cp * cp,
      2.0 * cp * sp * sr,
      -2.0 * cp * cr * sp,
      2.0 * cp * cp * cr * sr;
  return g;
}

/// Direction half of the quadratic gain form: squares and pairwise products
/// of a unit vector's components. Even in d, so the link orientation sign
/// does not matter.
inline Vec7 direction_quadratic_vector(const Vec3& d) {
  detail::require_finite(d, "direction_quadratic_vector");
  if (std::abs(d.norm() - 1.0) > 1e-9) {
    throw std::domain_error("direction_quadratic_vector: direction must be unit length");
  }
  Vec7 v;
  v << 1.0, d.x() * d.x(), d.y() * d.y(), d.z() * d.z(), d.x() * d.y(),
      d.x() * d.z(), d.y() * d.z();
  return v;
}

/// Surrogate power gain D^2 * (g.v); g.v is the squared cosine between the
/// link direction and the dipole axis, measured from the broadside plane,
/// clamped to [0, 1] against rounding.
inline double approx_power_gain(const Attitude& att, const Vec3& d,
                                double directivity = kHalfWaveDipoleDirectivity) {
  const double gv = gain_attitude_vector(att).dot(direction_quadratic_vector(d));
  return directivity * directivity * std::clamp(gv, 0.0, 1.0);
}

/// Exact power gain of a tilted dipole toward a world-frame link vector.
inline double exact_power_gain(const Attitude& att, const Vec3& world_link,
                               double directivity = kHalfWaveDipoleDirectivity) {
  const Vec3 body = rotation_world_to_body(att) * world_link;
  const double g = dipole_gain(angle_from_dipole_axis(body), directivity);
  return g * g;
}

struct LinkSnrs {
  double snr_uav = 0.0;  // peer-UAV -> relay hop
  double snr_bs = 0.0;   // relay -> base-station hop
};

/// SNRs of both hops for one time step. Gain factors are normalized by D^2
/// per antenna so all three models share the same lumped budgets; the BS end
/// of the downlink always contributes factor 1 (tracking beam).
inline LinkSnrs link_snrs(const Vec3& relay_pos, const Attitude& relay_att,
                          const Vec3& peer_pos, const Attitude& peer_att,
                          const Vec3& bs_pos, const LinkBudget& budget,
                          GainModel model) {
  const Vec3 to_bs = bs_pos - relay_pos;
  const Vec3 to_peer = peer_pos - relay_pos;
  const double r2_bs = to_bs.squaredNorm();
  const double r2_peer = to_peer.squaredNorm();
  if (r2_bs < kCoincidentTol * kCoincidentTol ||
      r2_peer < kCoincidentTol * kCoincidentTol) {
    throw std::domain_error("link_snrs: coincident positions");
  }
  double gamma_bs = 1.0;
  double gamma_peer = 1.0;
  const double d2 = budget.dipole_directivity * budget.dipole_directivity;
  switch (model) {
    case GainModel::PatternAgnostic:
      break;
    case GainModel::QuadraticSurrogate: {
      const Vec3 d_bs = to_bs / std::sqrt(r2_bs);
      const Vec3 d_peer = to_peer / std::sqrt(r2_peer);
      gamma_bs = approx_power_gain(relay_att, d_bs, budget.dipole_directivity) / d2;
      gamma_peer =
          approx_power_gain(relay_att, d_peer, budget.dipole_directivity) / d2 *
          approx_power_gain(peer_att, d_peer, budget.dipole_directivity) / d2;
      break;
    }
    case GainModel::Exact: {
      gamma_bs = exact_power_gain(relay_att, to_bs, budget.dipole_directivity) / d2;
      gamma_peer =
          exact_power_gain(relay_att, to_peer, budget.dipole_directivity) / d2 *
          exact_power_gain(peer_att, -to_peer, budget.dipole_directivity) / d2;
      break;
    }
  }
  LinkSnrs out;
  out.snr_bs = budget.k_relay_bs * gamma_bs / r2_bs;
  out.snr_uav = budget.k_uav_uav * gamma_peer / r2_peer;
  return out;
}

/// Normalized rate of one hop, bits per channel use.
inline double normalized_rate(double snr) { return std::log2(1.0 + snr); }

/// Per-time-step link state: SNRs, per-hop rates, and the end-to-end
/// bottleneck rate min(rate_uav, rate_bs).
struct LinkSample {
  double t = 0.0;
  double snr_uav = 0.0;
  double snr_bs = 0.0;
  double rate_uav = 0.0;
  double rate_bs = 0.0;
  double rate_end_to_end = 0.0;
};

inline LinkSample make_link_sample(double t, const LinkSnrs& snrs) {
  LinkSample s;
  s.t = t;
  s.snr_uav = snrs.snr_uav;
  s.snr_bs = snrs.snr_bs;
  s.rate_uav = normalized_rate(snrs.snr_uav);
  s.rate_bs = normalized_rate(snrs.snr_bs);
  s.rate_end_to_end = std::min(s.rate_uav, s.rate_bs);
  return s;
}

}  // namespace relay
