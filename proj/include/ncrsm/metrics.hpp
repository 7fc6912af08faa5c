#pragma once

// Evaluation quantities: mode match rate, relative state error,
// best-permutation parameter error tables, and the consistency-rate
// experiment for the switching least-squares estimator.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "ncrsm/em.hpp"
#include "ncrsm/model.hpp"

namespace ncrsm {

// Fraction of time steps where the estimated mode equals the true one,
// maximized over all label permutations of the estimate. Sequences are
// 0-based; n_modes <= 5 (the search is exhaustive).
double match_rate(const std::vector<int>& true_seq,
                  const std::vector<int>& est_seq, int n_modes);

// ||x_true - x_hat||_F^2 / ||x_true||_F^2 over the whole sequence.
double rel_state_error(const Matrix& x_true, const Matrix& x_hat);

// Max-row-sum norm, the matrix infinity norm.
double inf_norm(const Matrix& m);

struct ParamErrorTable {
  std::vector<int> perm_c;  // perm_c[j] = estimate's mode matched to true j
  std::vector<int> perm_a;
  std::vector<double> err_A_c, err_A_a, err_C_c, err_C_a;
  std::vector<double> err_Sigma_c, err_Sigma_a;
  double err_Sigma_m = 0.0;
  double err_pi_c = 0.0;
  double err_pi_a = 0.0;
  double total = 0.0;  // sum of all entries above
};

// Per-matrix infinity-norm errors under the (perm_c, perm_a) label pairing
// that minimizes the total error; the search is exhaustive over both
// permutation sets.
ParamErrorTable param_error(const ModelParams& params_true,
                            const ModelParams& params_est);

struct RateRun {
  int T = 0;
  std::uint64_t seed = 0;
  bool diverged = false;
  // Per-mode infinity-norm errors (index = mode).
  std::vector<double> err_A_c, err_A_a, err_C_c, err_C_a;
  std::vector<double> err_Sigma_c, err_Sigma_a;
  double err_Sigma_m = 0.0;
  double max_A_error = 0.0;  // max over both subsystems and all modes
  double bound = 0.0;        // sqrt(log T / T)
  double ratio = 0.0;        // max_A_error / bound
};

struct RateExperimentConfig {
  ModelParams params_true;
  Vector x_c0, x_aT1;            // boundary states for the simulations
  std::vector<int> T_grid;       // strictly increasing, length >= 3
  std::vector<std::uint64_t> seeds;
  bool oracle_mode = true;       // true: switching LS on true states/sequences
  EmConfig em;                   // used when oracle_mode == false
  int jobs = 1;
};

struct RateExperiment {
  std::vector<int> T_grid;
  bool oracle_mode = true;
  std::vector<RateRun> runs;          // size |T_grid| * |seeds|
  std::vector<double> median_error;   // per T, median over seeds of max_A_error
  std::vector<double> bound;          // per T
  std::vector<double> median_ratio;   // per T
  int diverged_runs = 0;
};

// For each (T, seed): simulate from params_true, estimate parameters, record
// per-matrix errors against the truth and the error/bound ratio. Oracle mode
// feeds the true states and true sequences straight into the least-squares
// updates (labels stay aligned, no permutation search); otherwise the full
// EM pipeline runs and errors are taken under the best label permutation.
RateExperiment rate_experiment(const RateExperimentConfig& config);

// Plot-ready table: one row per (T, seed, mode) with columns
// T,seed,mode,err_Ac,err_Aa,err_Cc,err_Ca,err_Sc,err_Sa,err_Sm,bound,ratio.
// Modes beyond a subsystem's count leave that subsystem's cells empty.
std::string rate_experiment_csv(const RateExperiment& experiment);

}  // namespace ncrsm
