#pragma once

// M-step closed forms: mode probabilities by counting, dynamics matrices by
// per-mode least squares on the filtered means, output matrices by one joint
// sparse-block regression, covariances by normalized residual averaging.
// When the state estimates carry posterior covariances, the output and
// covariance updates add the corresponding second-moment terms, making every
// block the exact maximizer of the Q assembled by evaluate_Q; estimates
// without covariances (exactly known states) reduce to plain least squares.

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "ncrsm/estep.hpp"
#include "ncrsm/model.hpp"

namespace ncrsm {

struct MStepOptions {
  double ridge = 1e-9;            // lambda added to every Gram matrix
  double sigma_floor = 1e-8;      // eigenvalue floor for covariance updates
  double prob_floor = 1e-6;       // probability assigned to empty modes
};

// pi = per-mode assignment counts / T. The last entry closes the simplex so
// the vector sums to one exactly.
std::pair<Vector, Vector> update_pi(const ModeAssignment& assignment);

struct AUpdate {
  std::vector<Matrix> A_c;
  std::vector<Matrix> A_a;
  std::vector<int> carried_c;  // modes (0-based) kept from `previous`
  std::vector<int> carried_a;
};

// Per-mode weighted least squares: A_c(j) regresses x_hat_c(t) on
// x_hat_c(t-1) over the times assigned to mode j (x_hat_c(0) is the known
// boundary); A_a(l) uses the lead regressor x_hat_a(t+1). Modes with no
// assigned samples keep the previous estimate and are flagged.
AUpdate update_A(const ModeAssignment& assignment, const FilterResult& states,
                 const Vector& x_c0, const Vector& x_aT1,
                 const ModelParams& previous, const MStepOptions& options = {});

struct CUpdate {
  std::vector<Matrix> C_c;
  std::vector<Matrix> C_a;
  std::vector<int> starved_c;  // blocks with zero coverage (returned as zeros)
  std::vector<int> starved_a;
};

// All output matrices solved as one joint least-squares problem: each time
// step contributes a sparse regressor row placing x_hat_c(t) in causal block
// s_c(t) and x_hat_a(t) in anticausal block s_a(t), with target y(t). The
// per-(j,l) objectives couple the blocks, so the joint solve is their exact
// minimizer. Posterior state covariances, when present, enter the diagonal
// Gram blocks as second moments. Solved per output row from one Gram
// factorization.
CUpdate update_C(const ModeAssignment& assignment, const FilterResult& states,
                 const Matrix& y, const Dims& dims,
                 const MStepOptions& options = {});

struct SigmaUpdate {
  std::vector<Matrix> Sigma_c;
  std::vector<Matrix> Sigma_a;
  Matrix Sigma_m;
  std::vector<int> carried_c;
  std::vector<int> carried_a;
};

// Weighted residual outer products divided by their weight sums (the
// maximum-likelihood covariance of the per-mode residuals), plus the
// posterior-covariance terms of Q when the state estimates carry them,
// re-symmetrized and eigenvalue-floored. Empty modes carry the previous
// covariance forward.
SigmaUpdate update_Sigma(const ModeAssignment& assignment,
                         const FilterResult& states, const Matrix& y,
                         const Vector& x_c0, const Vector& x_aT1,
                         const std::vector<Matrix>& A_c_new,
                         const std::vector<Matrix>& A_a_new,
                         const std::vector<Matrix>& C_c_new,
                         const std::vector<Matrix>& C_a_new,
                         const ModelParams& previous,
                         const MStepOptions& options = {});

struct MStepResult {
  ModelParams params;
  std::vector<int> empty_modes_c;  // modes that carried forward
  std::vector<int> empty_modes_a;
};

// Full parameter update. Empty modes keep their previous matrices and get
// probability prob_floor, after which pi is renormalized.
MStepResult m_step(const ModeAssignment& assignment, const FilterResult& states,
                   const Matrix& y, const Vector& x_c0, const Vector& x_aT1,
                   const ModelParams& previous, const MStepOptions& options = {});

}  // namespace ncrsm
