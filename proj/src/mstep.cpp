#include "ncrsm/mstep.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <string>

namespace ncrsm {

namespace {

// counts / T with the last entry set to 1 - (sum of the others) so the
// result sums to 1.0 exactly in floating point.
Vector counts_to_simplex(const Eigen::VectorXi& counts, int T) {
  const int m = static_cast<int>(counts.size());
  Vector pi(m);
  double partial = 0.0;
  for (int i = 0; i + 1 < m; ++i) {
    pi[i] = static_cast<double>(counts[i]) / T;
    partial += pi[i];
  }
  pi[m - 1] = 1.0 - partial;
  return pi;
}

Eigen::VectorXi mode_counts(const std::vector<int>& seq, int m) {
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(m);
  for (int s : seq) counts[s] += 1;
  return counts;
}

Matrix floor_eigenvalues(const Matrix& m, double floor) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  Vector evals = es.eigenvalues().cwiseMax(floor);
  return symmetrize(es.eigenvectors() * evals.asDiagonal() *
                    es.eigenvectors().transpose());
}

// Solves X * Gram = Rhs for X (the regression coefficient with regressors on
// the right), via one LDLT factorization of the ridged Gram. The system is
// equilibrated first (D G D with unit diagonal): regressor blocks from the
// two subsystems can differ in scale by many orders of magnitude, and the
// diagonal rescaling solves the same ridged objective without losing the
// small block to roundoff.
Matrix solve_normal_equations(const Matrix& gram, const Matrix& rhs,
                              double ridge, const std::string& what) {
  const int p = static_cast<int>(gram.rows());
  Matrix g = gram + ridge * Matrix::Identity(p, p);
  if (!g.allFinite() || !rhs.allFinite()) {
    throw DivergenceError("m-step: non-finite normal equations for " + what);
  }
  const Vector d = g.diagonal().cwiseMax(ridge).cwiseSqrt().cwiseInverse();
  const Matrix g_scaled = d.asDiagonal() * g * d.asDiagonal();
  Eigen::LDLT<Matrix> ldlt(g_scaled);
  if (ldlt.info() != Eigen::Success) {
    throw DivergenceError("m-step: singular normal equations for " + what);
  }
  // X G = R  =>  (D G D) (D^-1 X') = D R'  (G symmetric).
  return (d.asDiagonal() *
          ldlt.solve(d.asDiagonal() * rhs.transpose()))
      .transpose();
}

}  // namespace

std::pair<Vector, Vector> update_pi(const ModeAssignment& assignment) {
  const int T = assignment.T();
  if (T < 1) throw ValidationError("update_pi: empty assignment");
  const int m_c = static_cast<int>(assignment.w_c.cols());
  const int m_a = static_cast<int>(assignment.w_a.cols());
  return {counts_to_simplex(mode_counts(assignment.s_c_hat, m_c), T),
          counts_to_simplex(mode_counts(assignment.s_a_hat, m_a), T)};
}

AUpdate update_A(const ModeAssignment& assignment, const FilterResult& states,
                 const Vector& x_c0, const Vector& x_aT1,
                 const ModelParams& previous, const MStepOptions& options) {
  const int T = assignment.T();
  if (states.T() != T) {
    throw ValidationError("update_A: states length does not match assignment");
  }
  const int m_c = static_cast<int>(assignment.w_c.cols());
  const int m_a = static_cast<int>(assignment.w_a.cols());
  const int n_xc = static_cast<int>(states.x_c_hat.rows());
  const int n_xa = static_cast<int>(states.x_a_hat.rows());

  AUpdate out;
  out.A_c.resize(m_c);
  out.A_a.resize(m_a);

  std::vector<Matrix> gram_c(m_c, Matrix::Zero(n_xc, n_xc));
  std::vector<Matrix> cross_c(m_c, Matrix::Zero(n_xc, n_xc));
  std::vector<Matrix> gram_a(m_a, Matrix::Zero(n_xa, n_xa));
  std::vector<Matrix> cross_a(m_a, Matrix::Zero(n_xa, n_xa));
  Eigen::VectorXi count_c = Eigen::VectorXi::Zero(m_c);
  Eigen::VectorXi count_a = Eigen::VectorXi::Zero(m_a);

  for (int t = 0; t < T; ++t) {
    const int j = assignment.s_c_hat[t];
    const Vector lag = (t == 0) ? x_c0 : Vector(states.x_c_hat.col(t - 1));
    gram_c[j].noalias() += lag * lag.transpose();
    cross_c[j].noalias() += states.x_c_hat.col(t) * lag.transpose();
    count_c[j] += 1;

    const int l = assignment.s_a_hat[t];
    const Vector lead =
        (t == T - 1) ? x_aT1 : Vector(states.x_a_hat.col(t + 1));
    gram_a[l].noalias() += lead * lead.transpose();
    cross_a[l].noalias() += states.x_a_hat.col(t) * lead.transpose();
    count_a[l] += 1;
  }

  for (int j = 0; j < m_c; ++j) {
    if (count_c[j] == 0) {
      out.A_c[j] = previous.A_c.at(j);
      out.carried_c.push_back(j);
      continue;
    }
    out.A_c[j] = solve_normal_equations(gram_c[j], cross_c[j], options.ridge,
                                        "A_c[" + std::to_string(j + 1) + "]");
  }
  for (int l = 0; l < m_a; ++l) {
    if (count_a[l] == 0) {
      out.A_a[l] = previous.A_a.at(l);
      out.carried_a.push_back(l);
      continue;
    }
    out.A_a[l] = solve_normal_equations(gram_a[l], cross_a[l], options.ridge,
                                        "A_a[" + std::to_string(l + 1) + "]");
  }
  return out;
}

CUpdate update_C(const ModeAssignment& assignment, const FilterResult& states,
                 const Matrix& y, const Dims& dims,
                 const MStepOptions& options) {
  const int T = assignment.T();
  if (states.T() != T || static_cast<int>(y.cols()) != T) {
    throw ValidationError("update_C: input lengths do not match");
  }
  const int n_xc = dims.n_xc;
  const int n_xa = dims.n_xa;
  const int width = dims.m_c * n_xc + dims.m_a * n_xa;

  // Joint Gram over the sparse block regressor. Each time step touches only
  // blocks (s_c(t), s_a(t)), so the Gram is accumulated blockwise. When the
  // state estimates carry posterior covariances the diagonal blocks use the
  // second moments x x' + P: that makes the solve the exact maximizer of the
  // assembled Q over the output matrices. Estimates without covariances
  // (exactly known states) reduce to the plain least-squares solve.
  const bool has_cov = static_cast<int>(states.P_c.size()) == T &&
                       static_cast<int>(states.P_a.size()) == T;
  Matrix gram = Matrix::Zero(width, width);
  Matrix rhs = Matrix::Zero(width, dims.n_y);  // sum z_t y(t)'
  Eigen::VectorXi count_c = Eigen::VectorXi::Zero(dims.m_c);
  Eigen::VectorXi count_a = Eigen::VectorXi::Zero(dims.m_a);

  for (int t = 0; t < T; ++t) {
    const int j = assignment.s_c_hat[t];
    const int l = assignment.s_a_hat[t];
    count_c[j] += 1;
    count_a[l] += 1;
    const int oc = j * n_xc;
    const int oa = dims.m_c * n_xc + l * n_xa;
    const Vector xc = states.x_c_hat.col(t);
    const Vector xa = states.x_a_hat.col(t);

    gram.block(oc, oc, n_xc, n_xc).noalias() += xc * xc.transpose();
    gram.block(oa, oa, n_xa, n_xa).noalias() += xa * xa.transpose();
    if (has_cov) {
      gram.block(oc, oc, n_xc, n_xc) += states.P_c[t];
      gram.block(oa, oa, n_xa, n_xa) += states.P_a[t];
    }
    gram.block(oc, oa, n_xc, n_xa).noalias() += xc * xa.transpose();
    gram.block(oa, oc, n_xa, n_xc).noalias() += xa * xc.transpose();
    rhs.block(oc, 0, n_xc, dims.n_y).noalias() += xc * y.col(t).transpose();
    rhs.block(oa, 0, n_xa, dims.n_y).noalias() += xa * y.col(t).transpose();
  }

  // coeff: width x n_y; column r solves the r-th output row's regression.
  const Matrix coeff = solve_normal_equations(gram, rhs.transpose(),
                                              options.ridge, "output matrices")
                           .transpose();

  CUpdate out;
  out.C_c.resize(dims.m_c);
  out.C_a.resize(dims.m_a);
  for (int j = 0; j < dims.m_c; ++j) {
    out.C_c[j] = coeff.block(j * n_xc, 0, n_xc, dims.n_y).transpose();
    if (count_c[j] == 0) out.starved_c.push_back(j);
  }
  for (int l = 0; l < dims.m_a; ++l) {
    out.C_a[l] =
        coeff.block(dims.m_c * n_xc + l * n_xa, 0, n_xa, dims.n_y).transpose();
    if (count_a[l] == 0) out.starved_a.push_back(l);
  }
  return out;
}

SigmaUpdate update_Sigma(const ModeAssignment& assignment,
                         const FilterResult& states, const Matrix& y,
                         const Vector& x_c0, const Vector& x_aT1,
                         const std::vector<Matrix>& A_c_new,
                         const std::vector<Matrix>& A_a_new,
                         const std::vector<Matrix>& C_c_new,
                         const std::vector<Matrix>& C_a_new,
                         const ModelParams& previous,
                         const MStepOptions& options) {
  const int T = assignment.T();
  if (states.T() != T || static_cast<int>(y.cols()) != T) {
    throw ValidationError("update_Sigma: input lengths do not match");
  }
  const int m_c = static_cast<int>(A_c_new.size());
  const int m_a = static_cast<int>(A_a_new.size());
  const int n_xc = static_cast<int>(states.x_c_hat.rows());
  const int n_xa = static_cast<int>(states.x_a_hat.rows());
  const int n_y = static_cast<int>(y.rows());

  // Residual outer products, plus the posterior-covariance terms of the
  // assembled Q when the state estimates carry them: each time step adds
  // P of the regressand state (and C P C' of both states for the output
  // equation). Without these terms the covariance estimates track the
  // residuals of the already-smoothed states, which systematically
  // understate the noise and send the next iteration's predictions out
  // overconfident.
  const bool has_cov = static_cast<int>(states.P_c.size()) == T &&
                       static_cast<int>(states.P_a.size()) == T;
  std::vector<Matrix> acc_c(m_c, Matrix::Zero(n_xc, n_xc));
  std::vector<Matrix> acc_a(m_a, Matrix::Zero(n_xa, n_xa));
  Matrix acc_m = Matrix::Zero(n_y, n_y);
  Eigen::VectorXi count_c = Eigen::VectorXi::Zero(m_c);
  Eigen::VectorXi count_a = Eigen::VectorXi::Zero(m_a);

  for (int t = 0; t < T; ++t) {
    const int j = assignment.s_c_hat[t];
    const int l = assignment.s_a_hat[t];

    const Vector lag = (t == 0) ? x_c0 : Vector(states.x_c_hat.col(t - 1));
    const Vector rc = states.x_c_hat.col(t) - A_c_new[j] * lag;
    acc_c[j].noalias() += rc * rc.transpose();
    count_c[j] += 1;

    const Vector lead =
        (t == T - 1) ? x_aT1 : Vector(states.x_a_hat.col(t + 1));
    const Vector ra = states.x_a_hat.col(t) - A_a_new[l] * lead;
    acc_a[l].noalias() += ra * ra.transpose();
    count_a[l] += 1;

    const Vector rm = y.col(t) - C_c_new[j] * states.x_c_hat.col(t) -
                      C_a_new[l] * states.x_a_hat.col(t);
    acc_m.noalias() += rm * rm.transpose();

    if (has_cov) {
      acc_c[j] += states.P_c[t];
      acc_a[l] += states.P_a[t];
      acc_m.noalias() +=
          C_c_new[j] * states.P_c[t] * C_c_new[j].transpose() +
          C_a_new[l] * states.P_a[t] * C_a_new[l].transpose();
    }
  }

  SigmaUpdate out;
  out.Sigma_c.resize(m_c);
  out.Sigma_a.resize(m_a);
  for (int j = 0; j < m_c; ++j) {
    if (count_c[j] == 0) {
      out.Sigma_c[j] = previous.Sigma_c.at(j);
      out.carried_c.push_back(j);
    } else {
      out.Sigma_c[j] =
          floor_eigenvalues(acc_c[j] / count_c[j], options.sigma_floor);
    }
  }
  for (int l = 0; l < m_a; ++l) {
    if (count_a[l] == 0) {
      out.Sigma_a[l] = previous.Sigma_a.at(l);
      out.carried_a.push_back(l);
    } else {
      out.Sigma_a[l] =
          floor_eigenvalues(acc_a[l] / count_a[l], options.sigma_floor);
    }
  }
  out.Sigma_m = floor_eigenvalues(acc_m / T, options.sigma_floor);
  return out;
}

MStepResult m_step(const ModeAssignment& assignment, const FilterResult& states,
                   const Matrix& y, const Vector& x_c0, const Vector& x_aT1,
                   const ModelParams& previous, const MStepOptions& options) {
  const Dims dims = previous.dims();
  auto [pi_c, pi_a] = update_pi(assignment);
  AUpdate a = update_A(assignment, states, x_c0, x_aT1, previous, options);
  CUpdate c = update_C(assignment, states, y, dims, options);
  SigmaUpdate s =
      update_Sigma(assignment, states, y, x_c0, x_aT1, a.A_c, a.A_a, c.C_c,
                   c.C_a, previous, options);

  MStepResult out;
  out.params.A_c = std::move(a.A_c);
  out.params.A_a = std::move(a.A_a);
  out.params.C_c = std::move(c.C_c);
  out.params.C_a = std::move(c.C_a);
  out.params.Sigma_c = std::move(s.Sigma_c);
  out.params.Sigma_a = std::move(s.Sigma_a);
  out.params.Sigma_m = std::move(s.Sigma_m);
  out.empty_modes_c = a.carried_c;
  out.empty_modes_a = a.carried_a;

  // Starved modes keep their previous output matrices too (the joint solve
  // returned zeros for them).
  for (int j : c.starved_c) out.params.C_c[j] = previous.C_c.at(j);
  for (int l : c.starved_a) out.params.C_a[l] = previous.C_a.at(l);

  // Empty modes get a floor probability, then the vector is renormalized.
  for (int j : out.empty_modes_c) pi_c[j] = options.prob_floor;
  for (int l : out.empty_modes_a) pi_a[l] = options.prob_floor;
  if (!out.empty_modes_c.empty()) pi_c /= pi_c.sum();
  if (!out.empty_modes_a.empty()) pi_a /= pi_a.sum();
  out.params.pi_c = pi_c;
  out.params.pi_a = pi_a;
  return out;
}

}  // namespace ncrsm
