#include "relay/cli.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace relay;

namespace {

std::filesystem::path work_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "relay_cli_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string write_file(const std::string& name, const std::string& content) {
  const auto path = work_dir() / name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// hovering peer over a short horizon; quick to solve
std::string tiny_scenario(const std::string& name, const std::string& solver_extra = "") {
  return write_file(name, R"({
    "bs_position": [1, 3, 1.5], "relay_start": [0, 3, 1.5],
    "peer": {"kind": "hover", "params": {"position": [4, 3, 1.5]}},
    "v_max": 4, "a_max": 4, "k_relay_bs": 1e9, "k_uav_uav": 1e9,
    "dipole_directivity": 1.64, "p_norm": 10, "T": 1.5, "Ts": 0.05)" +
                        solver_extra + "}");
}

std::string path_in_work(const std::string& name) { return (work_dir() / name).string(); }

}  // namespace

TEST_CASE("optimize writes trajectory and report") {
  const std::string scenario = tiny_scenario("opt_ok.json");
  const std::string out = path_in_work("opt_traj.csv");
  const std::string report = path_in_work("opt_report.json");
  const int code = cmd_optimize(scenario, "aware", out, report);
  CHECK(code == 0);

  const Trajectory traj = read_trajectory(out);
  CHECK(traj.knots.size() == 31);
  CHECK(traj.knots[0].position == Vec3(0, 3, 1.5));
  CHECK(traj.has_attitudes());

  const Json j = Json::parse(std::ifstream(report));
  CHECK(j.at("model") == "aware");
  CHECK(j.at("feasible").get<bool>());
  CHECK(j.at("max_constraint_violation").get<double>() <= 1e-3);
  CHECK(j.at("cost_history").size() >= 2);
  CHECK(j.at("feasibility_audit").at("violations").is_array());
}

TEST_CASE("optimize maps failures to exit codes") {
  CHECK(cmd_optimize("/nowhere/missing.json", "aware", path_in_work("x.csv")) == 1);

  const std::string scenario = tiny_scenario("opt_bad_model.json");
  CHECK(cmd_optimize(scenario, "psychic", path_in_work("x.csv")) == 1);

  // limits far too tight to leave the start while tracking the cost, and a
  // budget too small to repair the transient: result stays infeasible
  const std::string cramped = write_file("opt_cramped.json", R"({
    "bs_position": [1, 3, 1.5], "relay_start": [0, 3, 1.5],
    "peer": {"kind": "hover", "params": {"position": [4, 3, 1.5]}},
    "v_max": 0.05, "a_max": 0.05, "k_relay_bs": 1e9, "k_uav_uav": 1e9,
    "dipole_directivity": 1.64, "p_norm": 10, "T": 1.0, "Ts": 0.05,
    "solver": {"max_iters": 2, "penalty_rounds": 1, "penalty_init": 1e-9}})");
  const std::string report = path_in_work("cramped_report.json");
  CHECK(cmd_optimize(cramped, "aware", path_in_work("cramped.csv"), report) == 2);
  const Json j = Json::parse(std::ifstream(report));
  CHECK_FALSE(j.at("feasible").get<bool>());
  CHECK_FALSE(j.at("feasibility_audit").at("violations").empty());
}

TEST_CASE("evaluate replays a trajectory and reports the bottleneck") {
  const std::string scenario = tiny_scenario("eval.json");
  const Scenario sc = load_scenario(scenario);

  // stationary relay at its start point: feasible by construction
  const Trajectory hold = initial_guess(sc, InitStrategy::Hold);
  const std::string relay_csv = path_in_work("eval_hold.csv");
  write_trajectory(hold, relay_csv);

  const std::string trace_csv = path_in_work("eval_trace.csv");
  CHECK(cmd_evaluate(scenario, relay_csv, trace_csv) == 0);

  const auto rows = read_trace(trace_csv);
  CHECK(rows.size() == sc.peer.knots.size());

  // the written trace agrees with a direct evaluation, bit for bit
  const EvaluateOutcome direct = run_evaluate(sc, hold, path_in_work("eval_trace2.csv"));
  double min_rate = rows[0][5];
  for (const auto& r : rows) min_rate = std::min(min_rate, r[5]);
  CHECK(min_rate == direct.summary.min_rate);

  double total = 0.0;
  for (const auto& r : rows) total += r[5];
  CHECK(total == Catch::Approx(direct.summary.total_bits).margin(1e-12));
}

TEST_CASE("evaluate rejects grid mismatches but tolerates infeasible motion") {
  const std::string scenario = tiny_scenario("eval_mismatch.json");
  const Scenario sc = load_scenario(scenario);

  Trajectory wrong = initial_guess(sc, InitStrategy::Hold);
  wrong.knots.pop_back();
  const std::string wrong_csv = path_in_work("eval_wrong.csv");
  write_trajectory(wrong, wrong_csv);
  CHECK(cmd_evaluate(scenario, wrong_csv, path_in_work("t.csv")) == 1);

  // violates the limits: evaluation still runs (replay, not gating)
  Trajectory fast = initial_guess(sc, InitStrategy::Hold);
  for (std::size_t k = 0; k < fast.knots.size(); ++k) {
    fast.knots[k].position.y() = 3.0 + 8.0 * fast.knots[k].t;  // 8 m/s > v_max
    fast.knots[k].velocity = Vec3(0, 8, 0);
  }
  const std::string fast_csv = path_in_work("eval_fast.csv");
  write_trajectory(fast, fast_csv);
  CHECK(cmd_evaluate(scenario, fast_csv, path_in_work("t2.csv")) == 0);
}

TEST_CASE("compare writes a consistent report") {
  const std::string scenario = tiny_scenario("cmp.json");
  const std::string out = path_in_work("cmp.json.out.json");
  const std::string aware_csv = path_in_work("cmp_aware.csv");
  const std::string agn_csv = path_in_work("cmp_agnostic.csv");
  const int code = cmd_compare(scenario, out, aware_csv, agn_csv);
  CHECK(code == 0);

  const Json j = Json::parse(std::ifstream(out));
  CHECK(j.at("status") == "ok");

  // totals equal re-running the evaluator on the emitted trajectories
  const Scenario sc = load_scenario(scenario);
  const EvaluateOutcome aware_eval =
      run_evaluate(sc, read_trajectory(aware_csv), path_in_work("cmp_aware_trace.csv"));
  const EvaluateOutcome agn_eval =
      run_evaluate(sc, read_trajectory(agn_csv), path_in_work("cmp_agn_trace.csv"));
  CHECK(j.at("total_bits_aware").get<double>() == aware_eval.summary.total_bits);
  CHECK(j.at("total_bits_agnostic").get<double>() == agn_eval.summary.total_bits);
  CHECK(j.at("min_rate_aware").get<double>() == aware_eval.summary.min_rate);
  CHECK(j.at("min_rate_agnostic").get<double>() == agn_eval.summary.min_rate);

  // improvement percentages follow their definition
  const double total_a = j.at("total_bits_aware").get<double>();
  const double total_b = j.at("total_bits_agnostic").get<double>();
  CHECK(j.at("improvement_total_pct").get<double>() ==
        Catch::Approx(100.0 * (total_a - total_b) / total_b).margin(1e-12));

  // hover peer, horizontal links: awareness buys nothing here
  CHECK(std::abs(j.at("improvement_total_pct").get<double>()) < 1e-3);
  CHECK(std::abs(j.at("improvement_min_rate_pct").get<double>()) < 1e-3);

  // embedded traces sum to the reported totals
  double embedded = 0.0;
  for (const Json& row : j.at("aware").at("trace")) {
    embedded += row.at("rate_end_to_end").get<double>();
  }
  CHECK(embedded == Catch::Approx(total_a).margin(1e-12));
}

TEST_CASE("repeated compare runs are byte-identical") {
  const std::string scenario = tiny_scenario("cmp_det.json");
  const std::string aware_csv = path_in_work("cmp_det_aware.csv");
  const std::string agn_csv = path_in_work("cmp_det_agnostic.csv");
  const std::string out1 = path_in_work("cmp_det1.json");
  const std::string out2 = path_in_work("cmp_det2.json");
  REQUIRE(cmd_compare(scenario, out1, aware_csv, agn_csv) == 0);
  const std::string aware_bytes = slurp(aware_csv);
  REQUIRE(cmd_compare(scenario, out2, aware_csv, agn_csv) == 0);
  CHECK(slurp(out1) == slurp(out2));
  CHECK(slurp(aware_csv) == aware_bytes);
}

TEST_CASE("plot-data emits per-figure files") {
  const std::string scenario = tiny_scenario("plot.json");
  const Scenario sc = load_scenario(scenario);
  const Trajectory hold = initial_guess(sc, InitStrategy::Hold);
  const std::string trace_csv = path_in_work("plot_trace.csv");
  run_evaluate(sc, hold, trace_csv);

  const std::string dir1 = path_in_work("plots_from_trace");
  CHECK(cmd_plot_data(trace_csv, dir1) == 0);
  CHECK(std::filesystem::exists(std::filesystem::path(dir1) / "attitudes.csv"));
  CHECK(std::filesystem::exists(std::filesystem::path(dir1) / "rates.csv"));

  const std::string cmp_out = path_in_work("plot_cmp.json");
  REQUIRE(cmd_compare(scenario, cmp_out, path_in_work("plot_a.csv"),
                      path_in_work("plot_b.csv")) == 0);
  const std::string dir2 = path_in_work("plots_from_cmp");
  CHECK(cmd_plot_data(cmp_out, dir2) == 0);
  int files = 0;
  for (const char* name : {"aware_attitudes.csv", "aware_rates.csv",
                           "agnostic_attitudes.csv", "agnostic_rates.csv"}) {
    if (std::filesystem::exists(std::filesystem::path(dir2) / name)) ++files;
  }
  CHECK(files == 4);

  // idempotent: re-running overwrites identically
  const std::string before = slurp((std::filesystem::path(dir2) / "aware_rates.csv").string());
  CHECK(cmd_plot_data(cmp_out, dir2) == 0);
  CHECK(slurp((std::filesystem::path(dir2) / "aware_rates.csv").string()) == before);

  CHECK(cmd_plot_data(path_in_work("missing_input.csv"), dir1) == 1);
}

TEST_CASE("worker cap does not change results") {
  const std::string scenario = tiny_scenario("threads.json");
  const std::string aware_csv = path_in_work("thr_aware.csv");
  const std::string agn_csv = path_in_work("thr_agnostic.csv");
  const std::string out1 = path_in_work("thr1.json");
  const std::string out2 = path_in_work("thr2.json");

  REQUIRE(cmd_compare(scenario, out1, aware_csv, agn_csv) == 0);
  setenv("RELAY_PLANNER_THREADS", "1", 1);
  CHECK(worker_count() == 1);
  REQUIRE(cmd_compare(scenario, out2, aware_csv, agn_csv) == 0);
  unsetenv("RELAY_PLANNER_THREADS");
  CHECK(slurp(out1) == slurp(out2));
}

TEST_CASE("run_cli parses subcommands and surfaces exit codes") {
  const std::string scenario = tiny_scenario("cli.json");
  const std::string out = path_in_work("cli_traj.csv");
  CHECK(run_cli({"optimize", scenario, "--model", "agnostic", "--out", out}) == 0);
  CHECK(std::filesystem::exists(out));
  CHECK(std::filesystem::exists(path_in_work("cli_traj.report.json")));

  const std::string trace = path_in_work("cli_trace.csv");
  CHECK(run_cli({"evaluate", scenario, out, "--out", trace}) == 0);

  CHECK(run_cli({"optimize", "--out", "x.csv"}) == 1);  // missing scenario
  CHECK(run_cli({"unknown-subcommand"}) == 1);
  CHECK(run_cli({"--help"}) == 0);
}
