#pragma once

// E-step machinery: MAP hard assignment of the two switching sequences and
// the modified bidirectional Kalman filter. The filter runs one backward pass
// for the anticausal state (using causal priors from the previous sweep, or a
// diffuse start on the first one) followed by one forward pass for the causal
// state using the fresh anticausal priors. Both updates share the joint
// innovation y(t) - C_c x^-_c(t) - C_a x^-_a(t) and its covariance
// S = C_c P^-_c C_c' + C_a P^-_a C_a' + Sigma_m; the cross-covariance between
// the two subsystems' estimation errors is taken to be zero.

#include <Eigen/Dense>

#include <vector>

#include "ncrsm/model.hpp"

namespace ncrsm {

// Hard (one-hot) mode assignment for every time step. w_c/w_a rows are
// one-hot indicator rows; s_c_hat/s_a_hat are the corresponding argmax
// indices (0-based). loglik_tables[t] is the m_c x m_a joint table the
// assignment was taken from.
struct ModeAssignment {
  std::vector<int> s_c_hat;
  std::vector<int> s_a_hat;
  Matrix w_c;  // T x m_c
  Matrix w_a;  // T x m_a
  std::vector<Matrix> loglik_tables;  // empty when built without tables

  int T() const { return static_cast<int>(s_c_hat.size()); }
};

struct FilterResult {
  Matrix x_c_hat;    // n_xc x T posterior means
  Matrix x_a_hat;    // n_xa x T
  Matrix x_c_prior;  // n_xc x T prior predictions (final forward pass)
  Matrix x_a_prior;  // n_xa x T (final backward pass)
  std::vector<Matrix> P_c, P_a;              // posterior covariances
  std::vector<Matrix> P_c_prior, P_a_prior;  // prior covariances
  std::vector<Matrix> K_c, K_a;              // gain sequences
  Matrix innovations;                        // n_y x T, final forward pass
  std::vector<Matrix> S;                     // innovation covariances
  int regularization_events = 0;  // times a near-singular S needed a bump

  int T() const { return static_cast<int>(x_c_hat.cols()); }
};

struct FilterOptions {
  // Prior covariance at the two starting edges, P^-_c(1) and P^-_a(T).
  // Default is a diffuse 10*I; boundary_exact instead uses the process
  // covariance of the assigned mode (the boundary states are known exactly).
  double init_prior_scale = 10.0;
  bool boundary_exact = false;
  int inner_sweeps = 1;  // backward+forward repetitions per E-step
  double divergence_norm_cap = 1e9;  // cap on time-averaged squared norms
};

struct QValue {
  double q_total = 0.0;
  double q1 = 0.0;  // measurement term
  double q2 = 0.0;  // causal state + mode-prior term
  double q3 = 0.0;  // anticausal state + mode-prior term
};

struct QOptions {
  // When true, each expected quadratic form adds the trace correction
  // tr(Sigma^-1 P) of the regressand's posterior covariance (and the
  // C P C' terms of both states for the measurement equation). The m_step
  // closed forms maximize exactly this objective when the state estimates
  // carry covariances; turn it off to score point estimates alone.
  bool include_trace_terms = true;
};

// Joint log-likelihood table for one time step: entry (j, l) is
// log N(y_t; C_c(j) A_c(j) xc_lag + C_a(l) A_a(l) xa_lead, S_t)
//   + log pi_c[j] + log pi_a[l],
// i.e. each candidate mode predicts y_t through its own dynamics applied to
// the neighbouring state estimates x_hat_c(t-1) and x_hat_a(t+1). Modes must
// enter the mean through A as well as C: with a mode-independent prediction
// the table cannot separate modes whose output maps are close, and the
// assignment stalls at the prior. A non-PD S_t is bumped by 1e-8*I;
// *regularized (if given) reports that.
Matrix mode_loglik_table(const ModelParams& params, const Vector& y_t,
                         const Vector& xc_lag, const Vector& xa_lead,
                         const Matrix& S_t, bool* regularized = nullptr);

// Tables for every t. The neighbouring estimates are prev's posteriors
// x_hat_c(t-1) and x_hat_a(t+1) (the known boundary states at the two edges),
// and the shared innovation covariance S_t is assembled from prev's prior
// covariances at the modes prev was filtered under (prev_assign) and the
// current params.
std::vector<Matrix> mode_loglik_tables(const ModelParams& params,
                                       const Matrix& y,
                                       const FilterResult& prev,
                                       const ModeAssignment& prev_assign,
                                       const Vector& x_c0, const Vector& x_aT1,
                                       int* regularization_events = nullptr);

// Joint argmax over each table; ties go to the lowest (causal, anticausal)
// index pair.
ModeAssignment assign_modes(const std::vector<Matrix>& tables);

// All-t assignment to the most probable mode pair under the priors alone;
// used to bootstrap the first sweep when no tables exist yet.
ModeAssignment prior_mode_assignment(const ModelParams& params, int T);

struct KalmanGains {
  Matrix K_c;
  Matrix K_a;
  Matrix S;
  bool regularized = false;
};

// S = C_c P^-_c C_c' + C_a P^-_a C_a' + Sigma_m; K_c = P^-_c C_c' S^-1 and
// K_a = P^-_a C_a' S^-1 (right-multiplied form; for scalar outputs this is
// the same number as the reversed order).
KalmanGains kalman_gains(const Matrix& C_c_j, const Matrix& C_a_l,
                         const Matrix& P_c_prior, const Matrix& P_a_prior,
                         const Matrix& Sigma_m);

// One E-step filter under a fixed assignment. `prev_other_state` supplies the
// causal priors consumed by the first backward pass; pass nullptr on the very
// first sweep (zero means with diffuse covariance are used instead).
FilterResult filter_sweep(const ModelParams& params,
                          const ModeAssignment& assignment, const Matrix& y,
                          const Vector& x_c0, const Vector& x_aT1,
                          const FilterResult* prev_other_state,
                          const FilterOptions& options = {});

struct AssignSweepResult {
  ModeAssignment assignment;
  FilterResult filter;
};

// Combined assignment + filter sweep: the backward pass picks s_a(t) by the
// per-candidate MAP rule argmax_l N(y; C_c xc_src + C_a(l) A_a(l) x_a(t+1),
// S_l) pi_a(l) as it recurses (causal side held at the previous sweep), and
// the forward pass picks s_c(t) the same way against the fresh anticausal
// estimates. Assigning inside the recursion matters: each accepted label
// immediately tightens the next step's prediction, so certainty propagates
// from the known boundaries inward instead of re-judging every step against
// a stale trajectory. Pass prev/prev_assign from the previous sweep, or both
// nullptr on the first one; in that case a forward bootstrap pass runs first,
// treating the anticausal share as diffuse noise, so the backward pass starts
// from causal predictions anchored at the known x_c(0) rather than folding
// the whole causal signal into the anticausal estimates.
AssignSweepResult assign_filter_sweep(const ModelParams& params,
                                      const Matrix& y, const Vector& x_c0,
                                      const Vector& x_aT1,
                                      const FilterResult* prev,
                                      const ModeAssignment* prev_assign,
                                      const FilterOptions& options = {});

// Q(theta_candidate, theta^k) assembled from the filtered moments: Gaussian
// log-densities at the posterior means, hard weights collapsing the mode
// sums, plus optional covariance trace corrections.
QValue evaluate_Q(const ModelParams& candidate, const ModeAssignment& assignment,
                  const FilterResult& filter, const Matrix& y,
                  const Vector& x_c0, const Vector& x_aT1,
                  const QOptions& options = {});

struct SmoothResult {
  ModeAssignment assignment;
  FilterResult filter;
  int passes = 0;        // assignment/filter rounds performed
  bool converged = false;  // assignment reached a fixed point
};

// Repeated E-step under fixed parameters: bootstrap from the prior-only
// assignment, then alternate assignment tables and filter sweeps until the
// assignment stops changing (or max_passes rounds). No parameters are
// updated; this is the state/mode smoothing entry point.
SmoothResult smooth_fixed_params(const ModelParams& params, const Matrix& y,
                                 const Vector& x_c0, const Vector& x_aT1,
                                 const FilterOptions& options = {},
                                 int max_passes = 10);

}  // namespace ncrsm
