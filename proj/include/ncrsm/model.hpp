#pragma once

// Parameter containers and validity checks for switching state-space models
// with one forward-propagating (causal) and one backward-propagating
// (anticausal) state recursion driving a shared output.

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ncrsm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Thrown on malformed inputs: bad dimensions, invalid probabilities,
// non-symmetric covariances, unparseable files. Maps to exit code 1 in the
// command-line tool.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when a numerical procedure blows up (non-finite state, exploding
// norms). Maps to exit code 2 in the command-line tool.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& msg, long t_index = -1)
      : std::runtime_error(msg), t(t_index) {}
  long t;  // 1-based time index where the blow-up was detected, -1 if n/a
};

// Problem sizes. Every field must be >= 1; the model always carries both a
// causal and an anticausal subsystem.
struct Dims {
  int n_y = 1;   // outputs
  int n_xc = 1;  // causal state dimension
  int n_xa = 1;  // anticausal state dimension
  int m_c = 1;   // causal modes
  int m_a = 1;   // anticausal modes

  bool valid() const {
    return n_y >= 1 && n_xc >= 1 && n_xa >= 1 && m_c >= 1 && m_a >= 1;
  }
  bool operator==(const Dims&) const = default;
};

// Full parameter set. Mode-indexed quantities are stored as vectors with one
// entry per mode; externally (files, CLI, reports) modes are numbered from 1,
// internally everything is 0-based.
struct ModelParams {
  std::vector<Matrix> A_c;      // m_c matrices, n_xc x n_xc
  std::vector<Matrix> A_a;      // m_a matrices, n_xa x n_xa
  std::vector<Matrix> C_c;      // m_c matrices, n_y x n_xc
  std::vector<Matrix> C_a;      // m_a matrices, n_y x n_xa
  std::vector<Matrix> Sigma_c;  // m_c matrices, n_xc x n_xc, sym. PSD
  std::vector<Matrix> Sigma_a;  // m_a matrices, n_xa x n_xa, sym. PSD
  Matrix Sigma_m;               // n_y x n_y, sym. PSD
  Vector pi_c;                  // length m_c, simplex
  Vector pi_a;                  // length m_a, simplex

  // Sizes inferred from the stored shapes. Meaningful only when the shapes
  // are mutually consistent; run validate() first when in doubt.
  Dims dims() const;
};

// One realization of the two independent switching sequences, 0-based mode
// indices, one entry per time step t = 1..T.
struct SwitchingSequence {
  std::vector<int> s_c;
  std::vector<int> s_a;

  int T() const { return static_cast<int>(s_c.size()); }
};

struct ValidityReport {
  bool ok = true;
  std::vector<std::string> violations;  // human-readable, one per defect
};

// Structural checks: shape consistency against `dims`, symmetry of all
// covariances, probability vectors on the simplex, and positive definiteness
// of every covariance. Pass require_positive_definite=false to accept
// semi-definite (including zero) covariances; the simulator does this to
// support the noiseless limit, while identification always demands PD.
// Collects every violation instead of stopping at the first.
ValidityReport validate(const ModelParams& params, const Dims& dims,
                        bool require_positive_definite = true);

// Same checks, throwing ValidationError with all violations joined.
void validate_or_throw(const ModelParams& params, const Dims& dims,
                       bool require_positive_definite = true);

struct SpectralReport {
  std::vector<double> radius_c;  // spectral radius per causal mode
  std::vector<double> radius_a;
  bool any_above_one = false;
};

// Advisory only: per-mode spectral radii. Individual modes may be unstable
// while the switched system is still well behaved on average, so a radius
// above one is reported but never treated as an error.
SpectralReport spectral_stability_hint(const ModelParams& params);

// (M + M^T) / 2. All covariance updates in the library pass through this to
// keep rounding noise from accumulating asymmetry.
Matrix symmetrize(const Matrix& m);

// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& m);

// True if v is entrywise >= -tol and sums to 1 within tol.
bool is_probability_vector(const Vector& v, double tol = 1e-12);

}  // namespace ncrsm
