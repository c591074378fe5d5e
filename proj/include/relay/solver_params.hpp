#pragma once

#include <cmath>
#include <stdexcept>

namespace relay {

struct SolverParams {
  int max_iters = 2000;         // accepted-iterate budget per penalty round
  double tol = 1e-4;            // relative stall tolerance over a 10-iterate window
  double penalty_init = 10.0;   // first-round penalty weight
  double penalty_growth = 5.0;  // weight multiplier per round
  int penalty_rounds = 6;
  double fd_step = 1e-6;        // finite-difference step in scaled variables
  int intra_samples = 4;        // interior feasibility samples per segment
  int seed = 0;                 // reserved; the solver itself is deterministic

  void validate() const {
    if (max_iters < 1) throw std::domain_error("SolverParams: max_iters must be >= 1");
    if (!(tol > 0.0) || !std::isfinite(tol)) {
      throw std::domain_error("SolverParams: tol must be > 0");
    }
    if (!(penalty_init > 0.0)) {
      throw std::domain_error("SolverParams: penalty_init must be > 0");
    }
    if (!(penalty_growth > 1.0)) {
      throw std::domain_error("SolverParams: penalty_growth must be > 1");
    }
    if (penalty_rounds < 1) {
      throw std::domain_error("SolverParams: penalty_rounds must be >= 1");
    }
    if (!(fd_step > 0.0)) throw std::domain_error("SolverParams: fd_step must be > 0");
    if (intra_samples < 0) {
      throw std::domain_error("SolverParams: intra_samples must be >= 0");
    }
  }
};

enum class InitStrategy { Hold, MidpointTrack };

}  // namespace relay
