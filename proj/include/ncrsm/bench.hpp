#pragma once

// Acceptance gate: ten scripted criteria (A1..A10) covering the full
// pipeline, each with tolerances pinned in code and a pass/fail verdict.
// Criteria whose premise is the literal academic benchmark at long
// horizons are attempted literally; when the generating parameter set is
// not average-stable the simulation rejects it and the criterion reports
// an honest failure with the measured blowup, plus clearly labeled
// supplementary results at a reduced horizon that stays inside double
// range (the verdict is never based on the supplement).

#include <iosfwd>
#include <string>
#include <vector>

#include "ncrsm/model.hpp"

namespace ncrsm::bench {

struct CriterionResult {
  std::string name;
  std::string title;
  bool passed = false;
  bool expected_infeasible = false;  // documented premise failure
  double seconds = 0.0;
  std::vector<std::string> details;
};

struct SuiteResult {
  std::vector<CriterionResult> criteria;
  bool all_passed = false;          // every criterion passed
  bool gate_passed = false;         // failures confined to documented set
};

// The two-mode academic benchmark system (n_y=1, n_xc=n_xa=2,
// m_c=m_a=2): unit covariances, pi_c=(0.7,0.3), pi_a=(0.5,0.5).
ModelParams benchmark_params();

// Same system with the causal mode-1 matrix rescaled to spectral radius
// 0.98. The printed mode-1 matrix has radius ~1.1646 and probability 0.7,
// which makes the switched product grow like e^{0.0866 t} (measured), so
// the literal system is not average-stable and cannot be simulated at
// T=10^4. The rescale is the minimal disclosed repair.
ModelParams benchmark_params_stabilized();

// Covariance sweep convention: Sigma_c=Sigma_a=sigma*I and Sigma_m=sigma,
// making the system scale-invariant (states scale by sqrt(sigma)).
ModelParams with_noise_scale(const ModelParams& params, double sigma);

std::vector<std::string> criterion_names();  // {"A1",...,"A10"}

CriterionResult run_criterion(const std::string& name, int jobs);

// Runs the named criteria (empty list = all), printing one verdict line
// plus detail lines per criterion to `out`.
SuiteResult run_suite(const std::vector<std::string>& names, int jobs,
                      std::ostream& out);

}  // namespace ncrsm::bench
