#pragma once

// Scenario configuration (JSON), trajectory files (CSV), and synthetic peer
// trajectory generators with analytic velocity/acceleration channels.

#include "relay/objective.hpp"
#include "relay/solver_params.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace relay {

using Json = nlohmann::ordered_json;

/// Number of grid steps N with N*ts = total_time; total_time must be a
/// multiple of ts within 1e-9.
inline int grid_steps(double total_time, double ts) {
  if (!(ts > 0.0) || !std::isfinite(ts)) {
    throw std::domain_error("field 'Ts': sampling period must be > 0");
  }
  if (!(total_time > 0.0) || !std::isfinite(total_time)) {
    throw std::domain_error("field 'T': total time must be > 0");
  }
  const long long n = std::llround(total_time / ts);
  if (n < 1 || std::abs(static_cast<double>(n) * ts - total_time) > 1e-9) {
    throw std::domain_error("field 'T': total time must be a multiple of the sampling period (within 1e-9)");
  }
  return static_cast<int>(n);
}

// ---------------------------------------------------------------------------
// Synthetic peer trajectories
// ---------------------------------------------------------------------------

/// Analytic per-axis peaks of a generated trajectory, for feasibility audits
/// and reporting.
struct MotionPeaks {
  Vec3 v_peak = Vec3::Zero();
  Vec3 a_peak = Vec3::Zero();
};

namespace detail {

template <typename PosFn, typename VelFn, typename AccFn>
Trajectory sample_analytic(PosFn&& pos, VelFn&& vel, AccFn&& acc, double total_time,
                           double ts, double gravity) {
  const int n = grid_steps(total_time, ts);
  Trajectory traj;
  traj.ts = ts;
  traj.knots.resize(n + 1);
  for (int k = 0; k <= n; ++k) {
    const double t = ts * k;
    TrajectoryKnot& knot = traj.knots[k];
    knot.t = t;
    knot.position = pos(t);
    knot.velocity = vel(t);
    knot.acceleration = acc(t);
    knot.attitude = attitude_from_acceleration(knot.acceleration, gravity);
  }
  return traj;
}

}  // namespace detail

inline Trajectory synth_hover(const Vec3& position, double total_time, double ts,
                              double gravity = kDefaultGravity) {
  detail::require_finite(position, "synth_hover");
  return detail::sample_analytic([&](double) { return position; },
                                 [](double) { return Vec3::Zero().eval(); },
                                 [](double) { return Vec3::Zero().eval(); },
                                 total_time, ts, gravity);
}

inline MotionPeaks hover_peaks() { return {}; }

inline Trajectory synth_line(const Vec3& start, const Vec3& velocity,
                             double total_time, double ts,
                             double gravity = kDefaultGravity) {
  detail::require_finite(start, "synth_line");
  detail::require_finite(velocity, "synth_line");
  return detail::sample_analytic(
      [&](double t) { return (start + velocity * t).eval(); },
      [&](double) { return velocity; },
      [](double) { return Vec3::Zero().eval(); }, total_time, ts, gravity);
}

inline MotionPeaks line_peaks(const Vec3& velocity) {
  return {velocity.cwiseAbs(), Vec3::Zero()};
}

/// Horizontal circle about `center`: position = center + r [cos, sin, 0](w t + phase).
inline Trajectory synth_arc(const Vec3& center, double radius, double angular_rate,
                            double phase, double total_time, double ts,
                            double gravity = kDefaultGravity) {
  detail::require_finite(center, "synth_arc");
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw std::domain_error("synth_arc: radius must be > 0");
  }
  if (!std::isfinite(angular_rate) || !std::isfinite(phase)) {
    throw std::domain_error("synth_arc: non-finite parameter");
  }
  const double w = angular_rate;
  return detail::sample_analytic(
      [&](double t) {
        const double u = w * t + phase;
        return (center + radius * Vec3(std::cos(u), std::sin(u), 0.0)).eval();
      },
      [&](double t) {
        const double u = w * t + phase;
        return (radius * w * Vec3(-std::sin(u), std::cos(u), 0.0)).eval();
      },
      [&](double t) {
        const double u = w * t + phase;
        return (-radius * w * w * Vec3(std::cos(u), std::sin(u), 0.0)).eval();
      },
      total_time, ts, gravity);
}

inline MotionPeaks arc_peaks(double radius, double angular_rate) {
  const double w = std::abs(angular_rate);
  return {Vec3(radius * w, radius * w, 0.0),
          Vec3(radius * w * w, radius * w * w, 0.0)};
}

/// Per-axis sinusoid: position_j = center_j + A_j sin(w_j t + phase_j).
inline Trajectory synth_lissajous(const Vec3& center, const Vec3& amplitude,
                                  const Vec3& angular_rate, const Vec3& phase,
                                  double total_time, double ts,
                                  double gravity = kDefaultGravity) {
  detail::require_finite(center, "synth_lissajous");
  detail::require_finite(amplitude, "synth_lissajous");
  detail::require_finite(angular_rate, "synth_lissajous");
  detail::require_finite(phase, "synth_lissajous");
  return detail::sample_analytic(
      [&](double t) {
        Vec3 p;
        for (int j = 0; j < 3; ++j) {
          p[j] = center[j] + amplitude[j] * std::sin(angular_rate[j] * t + phase[j]);
        }
        return p;
      },
      [&](double t) {
        Vec3 v;
        for (int j = 0; j < 3; ++j) {
          v[j] = amplitude[j] * angular_rate[j] * std::cos(angular_rate[j] * t + phase[j]);
        }
        return v;
      },
      [&](double t) {
        Vec3 a;
        for (int j = 0; j < 3; ++j) {
          a[j] = -amplitude[j] * angular_rate[j] * angular_rate[j] *
                 std::sin(angular_rate[j] * t + phase[j]);
        }
        return a;
      },
      total_time, ts, gravity);
}

inline MotionPeaks lissajous_peaks(const Vec3& amplitude, const Vec3& angular_rate) {
  MotionPeaks peaks;
  for (int j = 0; j < 3; ++j) {
    const double a = std::abs(amplitude[j]);
    const double w = std::abs(angular_rate[j]);
    peaks.v_peak[j] = a * w;
    peaks.a_peak[j] = a * w * w;
  }
  return peaks;
}

// Default lissajous motion: tilts reach roughly 15-20 degrees.
inline constexpr double kLissajousDefaultAmplitude[3] = {1.35, 0.9, 0.3};
inline constexpr double kLissajousDefaultRate[3] = {1.5, 1.2, 1.0};

// ---------------------------------------------------------------------------
// Trajectory CSV
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& token, const std::string& where) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw std::runtime_error(where + ": cannot parse number '" + token + "'");
  }
  if (!std::isfinite(value)) {
    throw std::runtime_error(where + ": non-finite entry '" + token + "'");
  }
  return value;
}

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

inline constexpr const char* kTrajectoryHeader = "t,px,py,pz,vx,vy,vz,ax,ay,az";
inline constexpr const char* kTrajectoryHeaderAttitude =
    "t,px,py,pz,vx,vy,vz,ax,ay,az,roll,pitch";

/// Write a trajectory as CSV, one row per knot, 17 significant digits (lossless
/// round trip). Attitude columns are written when every knot carries one.
inline void write_trajectory(const Trajectory& traj, const std::string& path) {
  if (traj.knots.size() < 2) {
    throw std::domain_error("write_trajectory: trajectory needs at least 2 knots");
  }
  std::ofstream out(path, std::ios::binary);  // binary keeps LF endings everywhere
  if (!out) throw std::runtime_error("write_trajectory: cannot open '" + path + "'");
  const bool with_attitude = traj.has_attitudes();
  out << (with_attitude ? kTrajectoryHeaderAttitude : kTrajectoryHeader) << "\n";
  for (const TrajectoryKnot& k : traj.knots) {
    std::string row = detail::format_g17(k.t);
    for (int j = 0; j < 3; ++j) row += "," + detail::format_g17(k.position[j]);
    for (int j = 0; j < 3; ++j) row += "," + detail::format_g17(k.velocity[j]);
    for (int j = 0; j < 3; ++j) row += "," + detail::format_g17(k.acceleration[j]);
    if (with_attitude) {
      row += "," + detail::format_g17(k.attitude->roll);
      row += "," + detail::format_g17(k.attitude->pitch);
    }
    out << row << "\n";
  }
  if (!out) throw std::runtime_error("write_trajectory: write failed for '" + path + "'");
}

/// Read a trajectory CSV. Times must form the uniform grid k*ts (tolerance
/// 1e-9*ts, then snapped exactly); attitude columns are optional.
inline Trajectory read_trajectory(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_trajectory: cannot open '" + path + "'");
  std::string line;
  auto next_line = [&](std::string& dst) {
    if (!std::getline(in, dst)) return false;
    if (!dst.empty() && dst.back() == '\r') dst.pop_back();
    return true;
  };
  if (!next_line(line)) {
    throw std::runtime_error("read_trajectory: '" + path + "' is empty");
  }
  bool with_attitude = false;
  if (line == kTrajectoryHeaderAttitude) {
    with_attitude = true;
  } else if (line != kTrajectoryHeader) {
    throw std::runtime_error("read_trajectory: '" + path + "' has an unexpected header '" + line + "'");
  }
  const std::size_t expected_fields = with_attitude ? 12 : 10;

  Trajectory traj;
  int row = 1;
  while (next_line(line)) {
    ++row;
    if (line.empty()) continue;  // tolerate a trailing blank line
    const std::string where = path + ":" + std::to_string(row);
    const auto fields = detail::split_csv_row(line);
    if (fields.size() != expected_fields) {
      throw std::runtime_error(where + ": expected " + std::to_string(expected_fields) +
                               " fields, got " + std::to_string(fields.size()));
    }
    TrajectoryKnot knot;
    knot.t = detail::parse_double(fields[0], where);
    for (int j = 0; j < 3; ++j) {
      knot.position[j] = detail::parse_double(fields[1 + j], where);
      knot.velocity[j] = detail::parse_double(fields[4 + j], where);
      knot.acceleration[j] = detail::parse_double(fields[7 + j], where);
    }
    if (with_attitude) {
      try {
        knot.attitude = Attitude(detail::parse_double(fields[10], where),
                                 detail::parse_double(fields[11], where));
      } catch (const std::domain_error& e) {
        throw std::runtime_error(where + ": " + e.what());
      }
    }
    traj.knots.push_back(std::move(knot));
  }
  if (traj.knots.size() < 2) {
    throw std::runtime_error("read_trajectory: '" + path + "' needs at least 2 rows");
  }

  const double ts = traj.knots[1].t - traj.knots[0].t;
  if (!(ts > 0.0)) {
    throw std::runtime_error("read_trajectory: '" + path + "' has a non-increasing time grid");
  }
  for (std::size_t k = 0; k < traj.knots.size(); ++k) {
    if (std::abs(traj.knots[k].t - static_cast<double>(k) * ts) > 1e-9 * ts) {
      throw std::runtime_error("read_trajectory: '" + path +
                               "' has a non-uniform time grid at row " +
                               std::to_string(k + 2));
    }
    traj.knots[k].t = static_cast<double>(k) * ts;
  }
  traj.ts = ts;
  return traj;
}

// ---------------------------------------------------------------------------
// Scenario JSON
// ---------------------------------------------------------------------------

struct Scenario {
  Vec3 bs_position = Vec3::Zero();
  Vec3 relay_start = Vec3::Zero();
  Trajectory peer;
  Vec3 v_max = Vec3::Zero();
  Vec3 a_max = Vec3::Zero();
  LinkBudget budget;
  CostParams cost;
  SolverParams solver;
  double gravity = kDefaultGravity;
  double total_time = 0.0;
  Json peer_source;  // normalized "peer" entry, file paths resolved

  void validate() const {
    detail::require_finite(bs_position, "Scenario bs_position");
    detail::require_finite(relay_start, "Scenario relay_start");
    if ((relay_start - bs_position).norm() < kCoincidentTol) {
      throw std::domain_error("field 'relay_start': must differ from bs_position");
    }
    if (peer.knots.size() < 2 || !(peer.ts > 0.0)) {
      throw std::domain_error("field 'peer': trajectory grid is degenerate");
    }
    for (int j = 0; j < 3; ++j) {
      if (!(v_max[j] > 0.0) || !std::isfinite(v_max[j])) {
        throw std::domain_error("field 'v_max': limits must be strictly positive");
      }
      if (!(a_max[j] > 0.0) || !std::isfinite(a_max[j])) {
        throw std::domain_error("field 'a_max': limits must be strictly positive");
      }
    }
    budget.validate();
    cost.validate();
    solver.validate();
    if (!(gravity > 0.0) || !std::isfinite(gravity)) {
      throw std::domain_error("field 'gravity': must be > 0");
    }
  }
};

namespace detail {

inline void reject_unknown_keys(const Json& obj, std::initializer_list<const char*> allowed,
                                const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) throw std::runtime_error(where + ": unknown field '" + key + "'");
  }
}

inline const Json& require_field(const Json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw std::runtime_error(where + ": missing field '" + key + "'");
  return obj.at(key);
}

inline double as_number(const Json& v, const std::string& what) {
  if (!v.is_number()) throw std::runtime_error(what + ": expected a number");
  return v.get<double>();
}

inline double number_field(const Json& obj, const char* key, const std::string& where) {
  return as_number(require_field(obj, key, where), where + ": field '" + key + "'");
}

inline int int_field_or(const Json& obj, const char* key, int fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const double v = as_number(obj.at(key), where + ": field '" + key + "'");
  if (v != std::floor(v) || std::abs(v) > 1e9) {
    throw std::runtime_error(where + ": field '" + key + "': expected an integer");
  }
  return static_cast<int>(v);
}

inline Vec3 as_vec3(const Json& v, const std::string& what) {
  if (!v.is_array() || v.size() != 3) {
    throw std::runtime_error(what + ": expected an array of 3 numbers");
  }
  Vec3 out;
  for (int j = 0; j < 3; ++j) out[j] = as_number(v.at(j), what);
  return out;
}

inline Vec3 vec3_field(const Json& obj, const char* key, const std::string& where) {
  return as_vec3(require_field(obj, key, where), where + ": field '" + key + "'");
}

// Scalar limits replicate across axes.
inline Vec3 vec3_or_scalar_field(const Json& obj, const char* key, const std::string& where) {
  const Json& v = require_field(obj, key, where);
  if (v.is_number()) return Vec3::Constant(v.get<double>());
  return as_vec3(v, where + ": field '" + key + "'");
}

inline Json vec3_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

}  // namespace detail

/// Build a peer trajectory from the scenario's "peer" entry and return the
/// normalized form of that entry (defaults materialized, file paths resolved).
inline Trajectory make_peer(const Json& peer, double total_time, double ts,
                            double gravity, const std::filesystem::path& base_dir,
                            Json* normalized) {
  const std::string where = "scenario: field 'peer'";
  if (!peer.is_object()) throw std::runtime_error(where + ": expected an object");

  if (peer.contains("file")) {
    detail::reject_unknown_keys(peer, {"file"}, where);
    const Json& f = peer.at("file");
    if (!f.is_string()) throw std::runtime_error(where + ": field 'file': expected a string");
    std::filesystem::path p = f.get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    Trajectory traj = read_trajectory(p.string());
    const int n = grid_steps(total_time, ts);
    if (static_cast<int>(traj.knots.size()) != n + 1) {
      throw std::runtime_error(where + ": file grid has " +
                               std::to_string(traj.knots.size()) + " knots, scenario expects " +
                               std::to_string(n + 1));
    }
    if (std::abs(traj.ts - ts) > 1e-9 * ts) {
      throw std::runtime_error(where + ": file sampling period " + detail::format_g17(traj.ts) +
                               " does not match 'Ts' " + detail::format_g17(ts));
    }
    // Snap to the scenario grid so downstream same-grid checks are exact.
    traj.ts = ts;
    for (std::size_t k = 0; k < traj.knots.size(); ++k) {
      traj.knots[k].t = static_cast<double>(k) * ts;
    }
    if (normalized) *normalized = Json{{"file", p.string()}};
    return traj;
  }

  detail::reject_unknown_keys(peer, {"kind", "params"}, where);
  const Json& kind_j = detail::require_field(peer, "kind", where);
  if (!kind_j.is_string()) throw std::runtime_error(where + ": field 'kind': expected a string");
  const std::string kind = kind_j.get<std::string>();
  const Json params = peer.contains("params") ? peer.at("params") : Json::object();
  if (!params.is_object()) throw std::runtime_error(where + ": field 'params': expected an object");
  const std::string pwhere = where + ": params";

  if (kind == "hover") {
    detail::reject_unknown_keys(params, {"position"}, pwhere);
    const Vec3 pos = detail::vec3_field(params, "position", pwhere);
    if (normalized) {
      *normalized = Json{{"kind", "hover"}, {"params", Json{{"position", detail::vec3_to_json(pos)}}}};
    }
    return synth_hover(pos, total_time, ts, gravity);
  }
  if (kind == "line") {
    detail::reject_unknown_keys(params, {"start", "velocity"}, pwhere);
    const Vec3 start = detail::vec3_field(params, "start", pwhere);
    const Vec3 vel = detail::vec3_field(params, "velocity", pwhere);
    if (normalized) {
      *normalized = Json{{"kind", "line"},
                         {"params", Json{{"start", detail::vec3_to_json(start)},
                                         {"velocity", detail::vec3_to_json(vel)}}}};
    }
    return synth_line(start, vel, total_time, ts, gravity);
  }
  if (kind == "arc") {
    detail::reject_unknown_keys(params, {"center", "radius", "angular_rate", "phase"}, pwhere);
    const Vec3 center = detail::vec3_field(params, "center", pwhere);
    const double radius = detail::number_field(params, "radius", pwhere);
    const double rate = detail::number_field(params, "angular_rate", pwhere);
    const double phase = params.contains("phase") ? detail::as_number(params.at("phase"), pwhere + ": field 'phase'") : 0.0;
    if (normalized) {
      *normalized = Json{{"kind", "arc"},
                         {"params", Json{{"center", detail::vec3_to_json(center)},
                                         {"radius", radius},
                                         {"angular_rate", rate},
                                         {"phase", phase}}}};
    }
    return synth_arc(center, radius, rate, phase, total_time, ts, gravity);
  }
  if (kind == "lissajous") {
    detail::reject_unknown_keys(params, {"center", "amplitude", "angular_rate", "phase"}, pwhere);
    const Vec3 center = detail::vec3_field(params, "center", pwhere);
    const Vec3 amplitude =
        params.contains("amplitude")
            ? detail::as_vec3(params.at("amplitude"), pwhere + ": field 'amplitude'")
            : Vec3(kLissajousDefaultAmplitude[0], kLissajousDefaultAmplitude[1],
                   kLissajousDefaultAmplitude[2]);
    const Vec3 rate =
        params.contains("angular_rate")
            ? detail::as_vec3(params.at("angular_rate"), pwhere + ": field 'angular_rate'")
            : Vec3(kLissajousDefaultRate[0], kLissajousDefaultRate[1], kLissajousDefaultRate[2]);
    const Vec3 phase = params.contains("phase")
                           ? detail::as_vec3(params.at("phase"), pwhere + ": field 'phase'")
                           : Vec3::Zero();
    if (normalized) {
      *normalized = Json{{"kind", "lissajous"},
                         {"params", Json{{"center", detail::vec3_to_json(center)},
                                         {"amplitude", detail::vec3_to_json(amplitude)},
                                         {"angular_rate", detail::vec3_to_json(rate)},
                                         {"phase", detail::vec3_to_json(phase)}}}};
    }
    return synth_lissajous(center, amplitude, rate, phase, total_time, ts, gravity);
  }
  throw std::runtime_error(where + ": unknown kind '" + kind + "'");
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("scenario: cannot open '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("scenario: '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("scenario: '" + path + "': expected a JSON object");
  const std::string where = "scenario";
  detail::reject_unknown_keys(j,
                              {"bs_position", "relay_start", "peer", "v_max", "a_max",
                               "k_relay_bs", "k_uav_uav", "dipole_directivity", "p_norm",
                               "T", "Ts", "solver", "gravity"},
                              where);

  Scenario sc;
  sc.total_time = detail::number_field(j, "T", where);
  const double ts = detail::number_field(j, "Ts", where);
  try {
    grid_steps(sc.total_time, ts);
  } catch (const std::domain_error& e) {
    throw std::runtime_error(where + ": " + e.what());
  }

  sc.bs_position = detail::vec3_field(j, "bs_position", where);
  sc.relay_start = detail::vec3_field(j, "relay_start", where);
  sc.v_max = detail::vec3_or_scalar_field(j, "v_max", where);
  sc.a_max = detail::vec3_or_scalar_field(j, "a_max", where);
  sc.budget.k_relay_bs = detail::number_field(j, "k_relay_bs", where);
  sc.budget.k_uav_uav = detail::number_field(j, "k_uav_uav", where);
  sc.budget.dipole_directivity = detail::number_field(j, "dipole_directivity", where);
  sc.cost.p_norm = detail::int_field_or(j, "p_norm", -1, where);
  if (sc.cost.p_norm == -1) throw std::runtime_error(where + ": missing field 'p_norm'");
  if (j.contains("gravity")) {
    sc.gravity = detail::as_number(j.at("gravity"), where + ": field 'gravity'");
  }

  if (j.contains("solver")) {
    const Json& s = j.at("solver");
    const std::string swhere = where + ": solver";
    if (!s.is_object()) throw std::runtime_error(swhere + ": expected an object");
    detail::reject_unknown_keys(s,
                                {"max_iters", "tol", "penalty_init", "penalty_growth",
                                 "penalty_rounds", "fd_step", "intra_samples", "seed"},
                                swhere);
    SolverParams d;  // defaults for omitted entries
    sc.solver.max_iters = detail::int_field_or(s, "max_iters", d.max_iters, swhere);
    sc.solver.tol = s.contains("tol") ? detail::as_number(s.at("tol"), swhere + ": field 'tol'") : d.tol;
    sc.solver.penalty_init = s.contains("penalty_init")
                                 ? detail::as_number(s.at("penalty_init"), swhere + ": field 'penalty_init'")
                                 : d.penalty_init;
    sc.solver.penalty_growth = s.contains("penalty_growth")
                                   ? detail::as_number(s.at("penalty_growth"), swhere + ": field 'penalty_growth'")
                                   : d.penalty_growth;
    sc.solver.penalty_rounds = detail::int_field_or(s, "penalty_rounds", d.penalty_rounds, swhere);
    sc.solver.fd_step = s.contains("fd_step") ? detail::as_number(s.at("fd_step"), swhere + ": field 'fd_step'") : d.fd_step;
    sc.solver.intra_samples = detail::int_field_or(s, "intra_samples", d.intra_samples, swhere);
    sc.solver.seed = detail::int_field_or(s, "seed", d.seed, swhere);
  }

  const std::filesystem::path base_dir = std::filesystem::absolute(path).parent_path();
  sc.peer = make_peer(detail::require_field(j, "peer", where), sc.total_time, ts, sc.gravity,
                      base_dir, &sc.peer_source);

  try {
    sc.validate();
  } catch (const std::domain_error& e) {
    throw std::runtime_error(where + ": " + e.what());
  }
  return sc;
}

/// Write a scenario back to JSON with defaults materialized; loading the
/// result reproduces the same scenario (fixed point).
inline void save_scenario(const Scenario& sc, const std::string& path) {
  Json j;
  j["bs_position"] = detail::vec3_to_json(sc.bs_position);
  j["relay_start"] = detail::vec3_to_json(sc.relay_start);
  j["peer"] = sc.peer_source;
  j["v_max"] = detail::vec3_to_json(sc.v_max);
  j["a_max"] = detail::vec3_to_json(sc.a_max);
  j["k_relay_bs"] = sc.budget.k_relay_bs;
  j["k_uav_uav"] = sc.budget.k_uav_uav;
  j["dipole_directivity"] = sc.budget.dipole_directivity;
  j["p_norm"] = sc.cost.p_norm;
  j["T"] = sc.total_time;
  j["Ts"] = sc.peer.ts;
  j["solver"] = Json{{"max_iters", sc.solver.max_iters},
                     {"tol", sc.solver.tol},
                     {"penalty_init", sc.solver.penalty_init},
                     {"penalty_growth", sc.solver.penalty_growth},
                     {"penalty_rounds", sc.solver.penalty_rounds},
                     {"fd_step", sc.solver.fd_step},
                     {"intra_samples", sc.solver.intra_samples},
                     {"seed", sc.solver.seed}};
  j["gravity"] = sc.gravity;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_scenario: cannot open '" + path + "'");
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("save_scenario: write failed for '" + path + "'");
}

}  // namespace relay
