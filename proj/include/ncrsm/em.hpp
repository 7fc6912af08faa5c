#pragma once

// EM driver: initialization schemes, the alternating assignment/filter/update
// loop, stopping rules, and multi-restart selection. Hard assignment with
// least-squares refits has no intrinsic ascent guarantee, so every update is
// gated: each iteration proposes one more sweep at the current parameters,
// then the refit (whole, or block by block when the whole loses), and keeps
// only proposals that do not decrease the observed log-likelihood. The trace
// is therefore non-decreasing; an iteration where nothing survives the gate
// has converged.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ncrsm/estep.hpp"
#include "ncrsm/model.hpp"
#include "ncrsm/mstep.hpp"

namespace ncrsm {

enum class InitScheme { kRandomPerturb, kUserSupplied, kDataDriven };

enum class StopReason { kConverged, kMaxIters, kDivergence };

const char* to_string(InitScheme scheme);
const char* to_string(StopReason reason);
InitScheme init_scheme_from_string(const std::string& name);

struct EmConfig {
  int max_iters = 200;
  double tol_loglik = 1e-7;  // relative change that counts as converged
  int restarts = 5;
  InitScheme init_scheme = InitScheme::kRandomPerturb;
  int inner_sweeps = 1;
  std::uint64_t seed = 0;

  // Filter behaviour (see FilterOptions).
  double init_prior_scale = 10.0;
  bool boundary_exact_prior = false;
  // Unstable-mode mixtures produce state magnitudes far beyond the default
  // guard; raise this when the data itself spans such scales.
  double divergence_norm_cap = 1e9;

  // M-step knobs.
  double ridge = 1e-9;
  double sigma_floor = 1e-8;
  double mode_prob_floor = 1e-6;

  // Safety net behind the proposal gate: a per-iteration log-likelihood
  // decrease beyond this relative tolerance stops the run with a divergence
  // diagnostic. The gate keeps decreases out by construction, so a trip
  // indicates a defect, never a silently accepted worse iterate.
  double monotonicity_tol = 1e-8;

  int jobs = 1;  // concurrent restarts

  // user-supplied scheme: restart 0 starts exactly here, later restarts get
  // entrywise jitter of this magnitude on the A and C matrices.
  ModelParams user_init;
  double user_init_jitter = 0.05;

  std::ostream* progress = nullptr;  // per-iteration diagnostics, may be null
};

struct EmReport {
  std::vector<double> loglik_trace;
  std::vector<QValue> q_trace;
  ModelParams final_params;
  ModeAssignment final_assignment;
  FilterResult final_filter;
  StopReason stop_reason = StopReason::kMaxIters;
  int restart_index_chosen = 0;
  int iterations = 0;      // parameter updates performed
  std::string diagnostics;  // non-empty on divergence stops
  int restarts_failed = 0;  // restarts aborted by filter divergence
};

// Builds a starting parameter set. restart_seed individualizes restarts; the
// result is deterministic given (y, dims, config, restart_seed).
ModelParams initialize(const Matrix& y, const Dims& dims, const EmConfig& config,
                       std::uint64_t restart_seed);

// Gaussian innovation log-likelihood of the data under the hard assignment:
// sum_t log N(y(t); C_c xc_pred + C_a xa_pred, S_t), with means and prior
// covariances taken from the filter and (C, Sigma_m) from params.
double observed_loglik(const ModelParams& params,
                       const ModeAssignment& assignment,
                       const FilterResult& filter, const Matrix& y);

// Full EM with restarts. Returns the report of the restart with the highest
// final log-likelihood (ties to the lowest index). Restarts whose filter
// diverges are dropped; if every restart diverges the error propagates.
EmReport run(const Matrix& y, const Vector& x_c0, const Vector& x_aT1,
             const Dims& dims, const EmConfig& config);

}  // namespace ncrsm
