#pragma once

// Command-line front end: optimize / evaluate / compare / plot-data, wired
// through the scenario loader, the solver, and the exact-model evaluator.
// Exit codes: 0 success, 1 input or setup error, 2 infeasible result.

#include "relay/optimizer.hpp"

#include <CLI11.hpp>

#include <array>
#include <cstdlib>
#include <future>
#include <iostream>
#include <thread>

namespace relay {

/// Worker cap from RELAY_PLANNER_THREADS (0 or unset = auto).
inline unsigned worker_count() {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const char* env = std::getenv("RELAY_PLANNER_THREADS");
  if (!env || !*env) return hw;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 0) return hw;
  return v == 0 ? hw : static_cast<unsigned>(v);
}

inline const char* model_name(GainModel model) {
  switch (model) {
    case GainModel::Exact: return "exact";
    case GainModel::QuadraticSurrogate: return "aware";
    case GainModel::PatternAgnostic: return "agnostic";
  }
  return "?";
}

inline GainModel parse_model(const std::string& name) {
  if (name == "aware") return GainModel::QuadraticSurrogate;
  if (name == "agnostic") return GainModel::PatternAgnostic;
  throw std::runtime_error("unknown model '" + name + "' (expected 'aware' or 'agnostic')");
}

inline InitStrategy parse_init(const std::string& name) {
  if (name == "midpoint") return InitStrategy::MidpointTrack;
  if (name == "hold") return InitStrategy::Hold;
  throw std::runtime_error("unknown init strategy '" + name + "' (expected 'midpoint' or 'hold')");
}

// ---------------------------------------------------------------------------
// Evaluation trace
// ---------------------------------------------------------------------------

inline constexpr const char* kTraceHeader =
    "t,snr_uav,snr_bs,rate_uav,rate_bs,rate_end_to_end,roll1,pitch1,roll2,pitch2";

struct TraceRow {
  LinkSample sample;
  Attitude relay_att;
  Attitude peer_att;
};

inline std::vector<TraceRow> build_trace_rows(const Scenario& sc, const Trajectory& relay,
                                              const ThroughputSummary& summary) {
  std::vector<TraceRow> rows;
  rows.reserve(summary.trace.size());
  for (std::size_t k = 0; k < summary.trace.size(); ++k) {
    rows.push_back({summary.trace[k], knot_attitude(relay.knots[k], sc.gravity),
                    knot_attitude(sc.peer.knots[k], sc.gravity)});
  }
  return rows;
}

inline void write_trace(const std::vector<TraceRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_trace: cannot open '" + path + "'");
  out << kTraceHeader << "\n";
  for (const TraceRow& r : rows) {
    out << detail::format_g17(r.sample.t) << ',' << detail::format_g17(r.sample.snr_uav)
        << ',' << detail::format_g17(r.sample.snr_bs) << ','
        << detail::format_g17(r.sample.rate_uav) << ','
        << detail::format_g17(r.sample.rate_bs) << ','
        << detail::format_g17(r.sample.rate_end_to_end) << ','
        << detail::format_g17(r.relay_att.roll) << ','
        << detail::format_g17(r.relay_att.pitch) << ','
        << detail::format_g17(r.peer_att.roll) << ','
        << detail::format_g17(r.peer_att.pitch) << "\n";
  }
  if (!out) throw std::runtime_error("write_trace: write failed for '" + path + "'");
}

inline std::vector<std::array<double, 10>> read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_trace: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_trace: '" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) {
    throw std::runtime_error("read_trace: '" + path + "' has an unexpected header");
  }
  std::vector<std::array<double, 10>> rows;
  int n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_csv_row(line);
    const std::string where = path + ":" + std::to_string(n);
    if (fields.size() != 10) {
      throw std::runtime_error(where + ": expected 10 fields, got " + std::to_string(fields.size()));
    }
    std::array<double, 10> row{};
    for (int j = 0; j < 10; ++j) row[j] = detail::parse_double(fields[j], where);
    rows.push_back(row);
  }
  if (rows.empty()) throw std::runtime_error("read_trace: '" + path + "' has no rows");
  return rows;
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

inline Json feasibility_json(const FeasibilityReport& audit) {
  Json violations = Json::array();
  for (const LimitViolation& v : audit.violations) {
    violations.push_back(Json{{"knot", v.knot},
                              {"axis", v.axis},
                              {"quantity", v.kind == LimitKind::Velocity ? "velocity" : "acceleration"},
                              {"value", v.value},
                              {"excess", v.excess}});
  }
  return Json{{"max_violation", audit.max_violation},
              {"feasible", audit.feasible()},
              {"violations", violations}};
}

struct OptimizeOutcome {
  SolveReport report;
  std::string trajectory_path;
  std::string report_path;
};

inline OptimizeOutcome run_optimize(const Scenario& sc, GainModel model, InitStrategy init,
                                    const std::string& out_csv, std::string report_path) {
  if (report_path.empty()) {
    std::filesystem::path p(out_csv);
    p.replace_extension(".report.json");
    report_path = p.string();
  }
  OptimizeOutcome outcome;
  outcome.report = solve(sc, model, sc.solver, init);
  outcome.trajectory_path = out_csv;
  outcome.report_path = report_path;
  write_trajectory(outcome.report.trajectory, out_csv);

  const FeasibilityReport audit = feasibility_audit(outcome.report.trajectory, sc.v_max,
                                                    sc.a_max, sc.solver.intra_samples);
  Json j;
  j["model"] = model_name(model);
  j["final_cost"] = outcome.report.final_cost;
  j["feasible"] = outcome.report.feasible;
  j["max_constraint_violation"] = outcome.report.max_constraint_violation;
  j["iterations_used"] = outcome.report.iterations_used;
  j["wall_time_s"] = outcome.report.wall_time_s;
  j["trajectory_csv"] = out_csv;
  j["feasibility_audit"] = feasibility_json(audit);
  j["round_starts"] = outcome.report.round_starts;
  j["cost_history"] = outcome.report.cost_history;
  std::ofstream out(report_path, std::ios::binary);
  if (!out) throw std::runtime_error("run_optimize: cannot open '" + report_path + "'");
  out << j.dump(2) << "\n";
  return outcome;
}

inline int cmd_optimize(const std::string& scenario_path, const std::string& model,
                        const std::string& out_csv, const std::string& report_path = "",
                        const std::string& init = "midpoint") {
  try {
    const Scenario sc = load_scenario(scenario_path);
    const OptimizeOutcome outcome =
        run_optimize(sc, parse_model(model), parse_init(init), out_csv, report_path);
    std::cout << "model=" << model << " final_cost=" << outcome.report.final_cost
              << " max_violation=" << outcome.report.max_constraint_violation
              << " iterations=" << outcome.report.iterations_used
              << " wall_time_s=" << outcome.report.wall_time_s << "\n";
    if (!outcome.report.feasible) {
      std::cerr << "optimize: result violates limits by "
                << outcome.report.max_constraint_violation << " (report written)\n";
      return 2;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "optimize: " << e.what() << "\n";
    return 1;
  }
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateOutcome {
  ThroughputSummary summary;
  FeasibilityReport audit;
};

inline EvaluateOutcome run_evaluate(const Scenario& sc, Trajectory relay,
                                    const std::string& out_trace) {
  if (relay.knots.size() != sc.peer.knots.size()) {
    throw std::runtime_error("evaluate: grid mismatch: relay trajectory has N=" +
                             std::to_string(relay.segments()) + " steps, scenario peer has N=" +
                             std::to_string(sc.peer.segments()));
  }
  if (std::abs(relay.ts - sc.peer.ts) > 1e-9 * sc.peer.ts) {
    throw std::runtime_error("evaluate: grid mismatch: relay sampling period " +
                             detail::format_g17(relay.ts) + " vs scenario " +
                             detail::format_g17(sc.peer.ts));
  }
  relay.ts = sc.peer.ts;
  for (std::size_t k = 0; k < relay.knots.size(); ++k) {
    relay.knots[k].t = static_cast<double>(k) * relay.ts;
  }

  EvaluateOutcome outcome;
  outcome.audit = feasibility_audit(relay, sc.v_max, sc.a_max, sc.solver.intra_samples);
  outcome.summary = exact_throughput(relay, sc.peer, sc.bs_position, sc.budget, sc.gravity);
  write_trace(build_trace_rows(sc, relay, outcome.summary), out_trace);
  return outcome;
}

inline int cmd_evaluate(const std::string& scenario_path, const std::string& relay_csv,
                        const std::string& out_trace) {
  try {
    const Scenario sc = load_scenario(scenario_path);
    const Trajectory relay = read_trajectory(relay_csv);
    const EvaluateOutcome outcome = run_evaluate(sc, relay, out_trace);
    if (!outcome.audit.feasible()) {
      std::cerr << "evaluate: warning: trajectory violates limits by "
                << outcome.audit.max_violation << "; evaluating anyway\n";
    }
    std::cout << "total_bits=" << detail::format_g17(outcome.summary.total_bits)
              << " min_rate=" << detail::format_g17(outcome.summary.min_rate) << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "evaluate: " << e.what() << "\n";
    return 1;
  }
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

struct CompareReport {
  double total_bits_aware = 0.0;
  double total_bits_agnostic = 0.0;
  double min_rate_aware = 0.0;
  double min_rate_agnostic = 0.0;
  double improvement_total_pct = 0.0;
  double improvement_min_rate_pct = 0.0;
  SolveReport aware;
  SolveReport agnostic;
  std::vector<TraceRow> trace_aware;
  std::vector<TraceRow> trace_agnostic;
};

namespace detail {

inline Json trace_json(const std::vector<TraceRow>& rows) {
  Json arr = Json::array();
  for (const TraceRow& r : rows) {
    arr.push_back(Json{{"t", r.sample.t},
                       {"snr_uav", r.sample.snr_uav},
                       {"snr_bs", r.sample.snr_bs},
                       {"rate_uav", r.sample.rate_uav},
                       {"rate_bs", r.sample.rate_bs},
                       {"rate_end_to_end", r.sample.rate_end_to_end},
                       {"roll1", r.relay_att.roll},
                       {"pitch1", r.relay_att.pitch},
                       {"roll2", r.peer_att.roll},
                       {"pitch2", r.peer_att.pitch}});
  }
  return arr;
}

}  // namespace detail

/// Optimize with both models, evaluate both trajectories under the exact
/// dipole model, and report the improvement of attitude awareness.
inline CompareReport run_compare(const Scenario& sc, InitStrategy init,
                                 const std::string& aware_csv,
                                 const std::string& agnostic_csv) {
  CompareReport report;
  if (worker_count() >= 2) {
    auto aware_future = std::async(std::launch::async, [&] {
      return solve(sc, GainModel::QuadraticSurrogate, sc.solver, init);
    });
    report.agnostic = solve(sc, GainModel::PatternAgnostic, sc.solver, init);
    report.aware = aware_future.get();
  } else {
    report.aware = solve(sc, GainModel::QuadraticSurrogate, sc.solver, init);
    report.agnostic = solve(sc, GainModel::PatternAgnostic, sc.solver, init);
  }
  write_trajectory(report.aware.trajectory, aware_csv);
  write_trajectory(report.agnostic.trajectory, agnostic_csv);

  const ThroughputSummary aware_eval = exact_throughput(
      report.aware.trajectory, sc.peer, sc.bs_position, sc.budget, sc.gravity);
  const ThroughputSummary agnostic_eval = exact_throughput(
      report.agnostic.trajectory, sc.peer, sc.bs_position, sc.budget, sc.gravity);
  report.trace_aware = build_trace_rows(sc, report.aware.trajectory, aware_eval);
  report.trace_agnostic = build_trace_rows(sc, report.agnostic.trajectory, agnostic_eval);
  report.total_bits_aware = aware_eval.total_bits;
  report.total_bits_agnostic = agnostic_eval.total_bits;
  report.min_rate_aware = aware_eval.min_rate;
  report.min_rate_agnostic = agnostic_eval.min_rate;
  report.improvement_total_pct =
      100.0 * (report.total_bits_aware - report.total_bits_agnostic) /
      report.total_bits_agnostic;
  report.improvement_min_rate_pct =
      100.0 * (report.min_rate_aware - report.min_rate_agnostic) /
      report.min_rate_agnostic;
  return report;
}

inline Json compare_json(const CompareReport& r, const std::string& scenario_path,
                         const std::string& aware_csv, const std::string& agnostic_csv,
                         const std::string& status) {
  auto side = [](const SolveReport& s, const std::string& csv,
                 const std::vector<TraceRow>& trace) {
    return Json{{"trajectory_csv", csv},
                {"final_cost", s.final_cost},
                {"feasible", s.feasible},
                {"max_constraint_violation", s.max_constraint_violation},
                {"iterations_used", s.iterations_used},
                {"trace", detail::trace_json(trace)}};
  };
  Json j;
  j["status"] = status;
  j["scenario"] = scenario_path;
  j["evaluation_model"] = "exact";
  j["total_bits_aware"] = r.total_bits_aware;
  j["total_bits_agnostic"] = r.total_bits_agnostic;
  j["min_rate_aware"] = r.min_rate_aware;
  j["min_rate_agnostic"] = r.min_rate_agnostic;
  j["improvement_total_pct"] = r.improvement_total_pct;
  j["improvement_min_rate_pct"] = r.improvement_min_rate_pct;
  j["aware"] = side(r.aware, aware_csv, r.trace_aware);
  j["agnostic"] = side(r.agnostic, agnostic_csv, r.trace_agnostic);
  return j;
}

inline int cmd_compare(const std::string& scenario_path, const std::string& out_json,
                       std::string aware_csv = "", std::string agnostic_csv = "",
                       const std::string& init = "midpoint") {
  const std::filesystem::path out_path(out_json);
  const std::filesystem::path base = out_path.parent_path() / out_path.stem();
  if (aware_csv.empty()) aware_csv = base.string() + "_aware.csv";
  if (agnostic_csv.empty()) agnostic_csv = base.string() + "_agnostic.csv";
  try {
    const Scenario sc = load_scenario(scenario_path);
    CompareReport report;
    std::string status = "ok";
    try {
      report = run_compare(sc, parse_init(init), aware_csv, agnostic_csv);
    } catch (const std::exception& e) {
      status = std::string("error: ") + e.what();
      Json j = compare_json(report, scenario_path, aware_csv, agnostic_csv, status);
      std::ofstream out(out_json, std::ios::binary);
      if (out) out << j.dump(2) << "\n";
      std::cerr << "compare: " << e.what() << "\n";
      return 1;
    }
    if (!report.aware.feasible || !report.agnostic.feasible) status = "infeasible";
    const Json j = compare_json(report, scenario_path, aware_csv, agnostic_csv, status);
    std::ofstream out(out_json, std::ios::binary);
    if (!out) throw std::runtime_error("compare: cannot open '" + out_json + "'");
    out << j.dump(2) << "\n";
    std::cout << "improvement_total_pct=" << detail::format_g17(report.improvement_total_pct)
              << " improvement_min_rate_pct="
              << detail::format_g17(report.improvement_min_rate_pct) << "\n";
    return status == "ok" ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "compare: " << e.what() << "\n";
    return 1;
  }
}

// ---------------------------------------------------------------------------
// plot-data
// ---------------------------------------------------------------------------

namespace detail {

inline void write_plot_files(const std::string& prefix, const Json& trace,
                             const std::filesystem::path& dir) {
  const double deg = 180.0 / kPi;
  std::ofstream att(dir / (prefix + "attitudes.csv"), std::ios::binary);
  std::ofstream rates(dir / (prefix + "rates.csv"), std::ios::binary);
  if (!att || !rates) {
    throw std::runtime_error("plot-data: cannot open outputs under '" + dir.string() + "'");
  }
  att << "t,roll1_deg,pitch1_deg,roll2_deg,pitch2_deg\n";
  rates << "t,rate_uav,rate_bs,rate_end_to_end\n";
  for (const Json& row : trace) {
    const double t = row.at("t").get<double>();
    att << format_g17(t) << ',' << format_g17(row.at("roll1").get<double>() * deg) << ','
        << format_g17(row.at("pitch1").get<double>() * deg) << ','
        << format_g17(row.at("roll2").get<double>() * deg) << ','
        << format_g17(row.at("pitch2").get<double>() * deg) << "\n";
    rates << format_g17(t) << ',' << format_g17(row.at("rate_uav").get<double>()) << ','
          << format_g17(row.at("rate_bs").get<double>()) << ','
          << format_g17(row.at("rate_end_to_end").get<double>()) << "\n";
  }
}

}  // namespace detail

/// Emit tidy per-figure CSVs (attitude-vs-time in degrees, rate-vs-time per
/// link) from either an evaluation trace CSV or a comparison report JSON.
inline int cmd_plot_data(const std::string& input_path, const std::string& out_dir) {
  try {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    if (std::filesystem::path(input_path).extension() == ".json") {
      std::ifstream in(input_path);
      if (!in) throw std::runtime_error("plot-data: cannot open '" + input_path + "'");
      Json j;
      try {
        j = Json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("plot-data: '" + input_path + "': " + e.what());
      }
      for (const char* tag : {"aware", "agnostic"}) {
        if (!j.contains(tag) || !j.at(tag).contains("trace")) {
          throw std::runtime_error("plot-data: '" + input_path + "' has no '" +
                                   std::string(tag) + "' trace");
        }
        detail::write_plot_files(std::string(tag) + "_", j.at(tag).at("trace"), dir);
      }
      return 0;
    }
    const auto rows = read_trace(input_path);
    Json trace = Json::array();
    for (const auto& r : rows) {
      trace.push_back(Json{{"t", r[0]},
                           {"snr_uav", r[1]},
                           {"snr_bs", r[2]},
                           {"rate_uav", r[3]},
                           {"rate_bs", r[4]},
                           {"rate_end_to_end", r[5]},
                           {"roll1", r[6]},
                           {"pitch1", r[7]},
                           {"roll2", r[8]},
                           {"pitch2", r[9]}});
    }
    detail::write_plot_files("", trace, dir);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "plot-data: " << e.what() << "\n";
    return 1;
  }
}

// ---------------------------------------------------------------------------
// argument parsing
// ---------------------------------------------------------------------------

inline int run_cli(std::vector<std::string> args) {
  CLI::App app{"Trajectory planner for a tilt-aware multirotor communications relay"};
  app.require_subcommand(1);

  std::string scenario, model = "aware", out, report, init = "midpoint";
  std::string relay_csv, trace_out, compare_out, aware_csv, agnostic_csv;
  std::string plot_input, plot_dir;

  CLI::App* optimize = app.add_subcommand("optimize", "Optimize the relay trajectory for a scenario");
  optimize->add_option("scenario", scenario, "Scenario JSON file")->required();
  optimize->add_option("--model", model, "Gain model: aware | agnostic")
      ->check(CLI::IsMember({"aware", "agnostic"}));
  optimize->add_option("--out", out, "Output trajectory CSV")->required();
  optimize->add_option("--report", report, "Solve report JSON (default: <out>.report.json)");
  optimize->add_option("--init", init, "Initial guess: midpoint | hold")
      ->check(CLI::IsMember({"midpoint", "hold"}));

  CLI::App* evaluate = app.add_subcommand("evaluate", "Replay a relay trajectory under the exact dipole model");
  evaluate->add_option("scenario", scenario, "Scenario JSON file")->required();
  evaluate->add_option("trajectory", relay_csv, "Relay trajectory CSV")->required();
  evaluate->add_option("--out", trace_out, "Output trace CSV")->required();

  CLI::App* compare = app.add_subcommand("compare", "Optimize aware and agnostic, evaluate both exactly");
  compare->add_option("scenario", scenario, "Scenario JSON file")->required();
  compare->add_option("--out", compare_out, "Comparison report JSON")->required();
  compare->add_option("--out-aware", aware_csv, "Aware trajectory CSV (default: <out>_aware.csv)");
  compare->add_option("--out-agnostic", agnostic_csv, "Agnostic trajectory CSV (default: <out>_agnostic.csv)");
  compare->add_option("--init", init, "Initial guess: midpoint | hold")
      ->check(CLI::IsMember({"midpoint", "hold"}));

  CLI::App* plot = app.add_subcommand("plot-data", "Emit per-figure CSVs from a trace CSV or comparison JSON");
  plot->add_option("input", plot_input, "trace CSV or comparison JSON")->required();
  plot->add_option("--out", plot_dir, "Output directory")->required();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (optimize->parsed()) return cmd_optimize(scenario, model, out, report, init);
  if (evaluate->parsed()) return cmd_evaluate(scenario, relay_csv, trace_out);
  if (compare->parsed()) return cmd_compare(scenario, compare_out, aware_csv, agnostic_csv, init);
  if (plot->parsed()) return cmd_plot_data(plot_input, plot_dir);
  return 1;
}

}  // namespace relay
