#pragma once

// Frames, rotations and link-direction geometry shared by the other modules.
//
// Euler convention: Z-X-Y (yaw about the world z axis, then roll about the
// intermediate x axis, then pitch about the resulting y axis), the standard
// flat-multirotor parameterization. Body-to-world composes as
//   R_WB = Rz(yaw) * Rx(roll) * Ry(pitch)
// so that with yaw = 0 the body z axis expressed in world coordinates is
//   z_B = [ sin(pitch), -sin(roll) cos(pitch), cos(roll) cos(pitch) ].
// The quadratic antenna-gain surrogate in comms.hpp is exact under this
// convention and only approximate under Z-Y-X.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace relay {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec7 = Eigen::Matrix<double, 7, 1>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDefaultGravity = 9.81;  // m/s^2

// Positions closer than this are treated as coincident.
inline constexpr double kCoincidentTol = 1e-12;

namespace detail {

inline void require_finite(const Vec3& v, const char* where) {
  if (!v.allFinite()) {
    throw std::domain_error(std::string(where) + ": non-finite component");
  }
}

}  // namespace detail

/// Roll/pitch/yaw in radians. Roll and pitch live in [-pi/2, pi/2]; yaw in
/// [-pi, pi] and is zero throughout this library.
struct Attitude {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  Attitude() = default;
  Attitude(double roll_, double pitch_, double yaw_ = 0.0)
      : roll(roll_), pitch(pitch_), yaw(yaw_) {
    if (!(std::isfinite(roll) && std::isfinite(pitch) && std::isfinite(yaw))) {
      throw std::domain_error("Attitude: non-finite angle");
    }
    if (!(std::abs(roll) <= kPi / 2.0) || !(std::abs(pitch) <= kPi / 2.0)) {
      throw std::domain_error("Attitude: |roll| and |pitch| must be <= pi/2");
    }
    if (!(yaw >= -kPi && yaw <= kPi)) {
      throw std::domain_error("Attitude: yaw must lie in [-pi, pi]");
    }
  }
};

/// Body-to-world rotation R_WB = Rz(yaw) * Rx(roll) * Ry(pitch).
inline Mat3 rotation_body_to_world(const Attitude& att) {
  const double cr = std::cos(att.roll), sr = std::sin(att.roll);
  const double cp = std::cos(att.pitch), sp = std::sin(att.pitch);
  const double cy = std::cos(att.yaw), sy = std::sin(att.yaw);
  Mat3 rz, rx, ry;
  rz << cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0;
  rx << 1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr;
  ry << cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp;
  return rz * rx * ry;
}

/// World-to-body rotation; applying it to a world-frame vector yields the
/// vector's coordinates in the vehicle body frame.
inline Mat3 rotation_world_to_body(const Attitude& att) {
  return rotation_body_to_world(att).transpose();
}

/// Angle in [0, pi] between a body-frame vector and the body z axis (the
/// dipole axis). Equal, up to sign, to the elevation-minus-pi/2 convention;
/// the dipole gain is even in this angle so both conventions give the same
/// gains. The cosine is clamped to absorb rounding at |cos| = 1.
inline double angle_from_dipole_axis(const Vec3& body_vec) {
  detail::require_finite(body_vec, "angle_from_dipole_axis");
  const double n = body_vec.norm();
  if (n < kCoincidentTol) {
    throw std::domain_error("angle_from_dipole_axis: coincident positions");
  }
  return std::acos(std::clamp(body_vec.z() / n, -1.0, 1.0));
}

/// Roll/pitch of a flat multirotor whose thrust axis carries accel + g*e3,
/// with yaw fixed at 0. Rejects free fall (zero thrust vector) and thrust
/// directions at or below the horizontal plane, where the flat-attitude
/// inversion degenerates.
inline Attitude attitude_from_acceleration(const Vec3& accel,
                                           double gravity = kDefaultGravity) {
  detail::require_finite(accel, "attitude_from_acceleration");
  const Vec3 thrust = accel + Vec3(0.0, 0.0, gravity);
  const double n = thrust.norm();
  if (n < kCoincidentTol) {
    throw std::domain_error(
        "attitude_from_acceleration: free-fall acceleration leaves the thrust "
        "direction undefined");
  }
  const Vec3 zb = thrust / n;
  if (zb.z() <= kCoincidentTol) {
    throw std::domain_error(
        "attitude_from_acceleration: thrust direction not above the "
        "horizontal plane");
  }
  const double pitch = std::asin(std::clamp(zb.x(), -1.0, 1.0));
  const double roll = std::atan2(-zb.y(), zb.z());
  return Attitude(roll, pitch, 0.0);
}

/// Unit vector pointing from `from` toward `to`.
inline Vec3 unit_direction(const Vec3& from, const Vec3& to) {
  detail::require_finite(from, "unit_direction");
  detail::require_finite(to, "unit_direction");
  const Vec3 diff = to - from;
  const double n = diff.norm();
  if (n < kCoincidentTol) {
    throw std::domain_error("unit_direction: coincident positions");
  }
  return diff / n;
}

}  // namespace relay
