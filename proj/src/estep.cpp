#include "ncrsm/estep.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "internal.hpp"

namespace ncrsm {

using internal::factor_innovation;
using internal::kCovBump;
using internal::log_det_from_llt;
using internal::log_gaussian;

namespace {

int argmax_lowest(const Vector& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

void check_assignment(const ModeAssignment& assignment, const Dims& d, int T) {
  if (assignment.T() != T ||
      static_cast<int>(assignment.s_a_hat.size()) != T) {
    throw ValidationError("filter_sweep: assignment length does not match data");
  }
  for (int t = 0; t < T; ++t) {
    if (assignment.s_c_hat[t] < 0 || assignment.s_c_hat[t] >= d.m_c ||
        assignment.s_a_hat[t] < 0 || assignment.s_a_hat[t] >= d.m_a) {
      throw ValidationError("filter_sweep: assignment contains out-of-range "
                            "mode index at t=" + std::to_string(t + 1));
    }
  }
}

}  // namespace

Matrix mode_loglik_table(const ModelParams& params, const Vector& y_t,
                         const Vector& xc_lag, const Vector& xa_lead,
                         const Matrix& S_t, bool* regularized) {
  const int m_c = static_cast<int>(params.C_c.size());
  const int m_a = static_cast<int>(params.C_a.size());
  bool bumped = false;
  const Eigen::LLT<Matrix> llt = factor_innovation(S_t, &bumped);
  if (regularized) *regularized = bumped;
  const double logdet = log_det_from_llt(llt);

  Matrix table(m_c, m_a);
  for (int j = 0; j < m_c; ++j) {
    // Candidate j's own one-step prediction of the causal output share.
    const Vector mean_c = params.C_c[j] * (params.A_c[j] * xc_lag);
    const double logpi_c = std::log(params.pi_c[j]);
    for (int l = 0; l < m_a; ++l) {
      const Vector residual =
          y_t - mean_c - params.C_a[l] * (params.A_a[l] * xa_lead);
      table(j, l) =
          log_gaussian(residual, llt, logdet) + logpi_c + std::log(params.pi_a[l]);
    }
  }
  return table;
}

std::vector<Matrix> mode_loglik_tables(const ModelParams& params,
                                       const Matrix& y,
                                       const FilterResult& prev,
                                       const ModeAssignment& prev_assign,
                                       const Vector& x_c0, const Vector& x_aT1,
                                       int* regularization_events) {
  const Dims d = params.dims();
  const int T = static_cast<int>(y.cols());
  if (prev.T() != T || prev_assign.T() != T) {
    throw ValidationError("mode_loglik_tables: previous sweep does not match "
                          "the data length");
  }
  if (x_c0.size() != d.n_xc || x_aT1.size() != d.n_xa) {
    throw ValidationError("mode_loglik_tables: boundary state dimensions do "
                          "not match the model");
  }
  int events = 0;
  std::vector<Matrix> tables(T);
  for (int t = 0; t < T; ++t) {
    const int j_prev = prev_assign.s_c_hat[t];
    const int l_prev = prev_assign.s_a_hat[t];
    const Matrix& Cc = params.C_c[j_prev];
    const Matrix& Ca = params.C_a[l_prev];
    const Matrix S_t =
        symmetrize(Cc * prev.P_c_prior[t] * Cc.transpose() +
                   Ca * prev.P_a_prior[t] * Ca.transpose() + params.Sigma_m);
    const Vector xc_lag = t == 0 ? x_c0 : Vector(prev.x_c_hat.col(t - 1));
    const Vector xa_lead =
        t == T - 1 ? x_aT1 : Vector(prev.x_a_hat.col(t + 1));
    bool bumped = false;
    tables[t] = mode_loglik_table(params, y.col(t), xc_lag, xa_lead, S_t,
                                  &bumped);
    if (bumped) ++events;
  }
  if (regularization_events) *regularization_events = events;
  return tables;
}

ModeAssignment assign_modes(const std::vector<Matrix>& tables) {
  if (tables.empty()) throw ValidationError("assign_modes: no tables given");
  const int T = static_cast<int>(tables.size());
  const int m_c = static_cast<int>(tables[0].rows());
  const int m_a = static_cast<int>(tables[0].cols());

  ModeAssignment out;
  out.s_c_hat.resize(T);
  out.s_a_hat.resize(T);
  out.w_c = Matrix::Zero(T, m_c);
  out.w_a = Matrix::Zero(T, m_a);
  out.loglik_tables = tables;

  for (int t = 0; t < T; ++t) {
    const Matrix& table = tables[t];
    if (table.rows() != m_c || table.cols() != m_a) {
      throw ValidationError("assign_modes: inconsistent table shape at t=" +
                            std::to_string(t + 1));
    }
    if (table.hasNaN()) {
      throw ValidationError("assign_modes: NaN table entry at t=" +
                            std::to_string(t + 1));
    }
    // Joint argmax; strict '>' keeps the lowest (j, l) on ties.
    int best_j = 0, best_l = 0;
    double best = table(0, 0);
    for (int j = 0; j < m_c; ++j) {
      for (int l = 0; l < m_a; ++l) {
        if (table(j, l) > best) {
          best = table(j, l);
          best_j = j;
          best_l = l;
        }
      }
    }
    out.s_c_hat[t] = best_j;
    out.s_a_hat[t] = best_l;
    out.w_c(t, best_j) = 1.0;
    out.w_a(t, best_l) = 1.0;
  }
  return out;
}

ModeAssignment prior_mode_assignment(const ModelParams& params, int T) {
  if (T < 1) throw ValidationError("prior_mode_assignment: T must be >= 1");
  const int j = argmax_lowest(params.pi_c);
  const int l = argmax_lowest(params.pi_a);
  ModeAssignment out;
  out.s_c_hat.assign(T, j);
  out.s_a_hat.assign(T, l);
  out.w_c = Matrix::Zero(T, params.pi_c.size());
  out.w_a = Matrix::Zero(T, params.pi_a.size());
  out.w_c.col(j).setOnes();
  out.w_a.col(l).setOnes();
  return out;
}

KalmanGains kalman_gains(const Matrix& C_c_j, const Matrix& C_a_l,
                         const Matrix& P_c_prior, const Matrix& P_a_prior,
                         const Matrix& Sigma_m) {
  KalmanGains out;
  Matrix S = symmetrize(C_c_j * P_c_prior * C_c_j.transpose() +
                        C_a_l * P_a_prior * C_a_l.transpose() + Sigma_m);
  bool bumped = false;
  const Eigen::LLT<Matrix> llt = factor_innovation(S, &bumped);
  if (bumped) {
    S += kCovBump * std::max(1.0, S.diagonal().maxCoeff()) *
         Matrix::Identity(S.rows(), S.cols());
  }
  out.regularized = bumped;
  out.S = S;
  // K = P^- C' S^-1, computed through the factorization as (S^-1 C P^-)'.
  out.K_c = llt.solve(C_c_j * P_c_prior).transpose();
  out.K_a = llt.solve(C_a_l * P_a_prior).transpose();
  return out;
}

FilterResult filter_sweep(const ModelParams& params,
                          const ModeAssignment& assignment, const Matrix& y,
                          const Vector& x_c0, const Vector& x_aT1,
                          const FilterResult* prev_other_state,
                          const FilterOptions& options) {
  const Dims d = params.dims();
  const int T = static_cast<int>(y.cols());
  if (T < 1) throw ValidationError("filter_sweep: empty data");
  if (y.rows() != d.n_y) {
    throw ValidationError("filter_sweep: y row count does not match n_y");
  }
  if (x_c0.size() != d.n_xc || x_aT1.size() != d.n_xa) {
    throw ValidationError("filter_sweep: boundary state dimensions mismatch");
  }
  check_assignment(assignment, d, T);
  if (options.inner_sweeps < 1) {
    throw ValidationError("filter_sweep: inner_sweeps must be >= 1");
  }
  if (prev_other_state && prev_other_state->T() != T) {
    throw ValidationError("filter_sweep: previous filter has mismatched length");
  }

  const Matrix I_c = Matrix::Identity(d.n_xc, d.n_xc);
  const Matrix I_a = Matrix::Identity(d.n_xa, d.n_xa);

  FilterResult out;
  out.x_c_hat.resize(d.n_xc, T);
  out.x_a_hat.resize(d.n_xa, T);
  out.x_c_prior.resize(d.n_xc, T);
  out.x_a_prior.resize(d.n_xa, T);
  out.P_c.resize(T);
  out.P_a.resize(T);
  out.P_c_prior.resize(T);
  out.P_a_prior.resize(T);
  out.K_c.resize(T);
  out.K_a.resize(T);
  out.innovations.resize(d.n_y, T);
  out.S.resize(T);

  // Causal priors consumed by the first backward pass: the previous sweep if
  // given, otherwise zero means with a diffuse covariance.
  Matrix src_xc_prior;
  std::vector<Matrix> src_Pc_prior;
  if (prev_other_state) {
    src_xc_prior = prev_other_state->x_c_prior;
    src_Pc_prior = prev_other_state->P_c_prior;
  } else {
    src_xc_prior = Matrix::Zero(d.n_xc, T);
    src_Pc_prior.assign(T, options.init_prior_scale * I_c);
  }

  for (int sweep = 0; sweep < options.inner_sweeps; ++sweep) {
    // Backward pass: anticausal update, causal side fixed at src priors.
    Vector xa_next = x_aT1;
    Matrix Pa_next;
    double accum = 0.0;
    for (int t = T - 1; t >= 0; --t) {
      const int j = assignment.s_c_hat[t];
      const int l = assignment.s_a_hat[t];
      const Matrix& Aa = params.A_a[l];
      const Matrix& Ca = params.C_a[l];

      const Vector xa_pred = Aa * xa_next;
      Matrix Pa_pred;
      if (t == T - 1) {
        Pa_pred = options.boundary_exact ? params.Sigma_a[l]
                                         : Matrix(options.init_prior_scale * I_a);
      } else {
        Pa_pred = symmetrize(Aa * Pa_next * Aa.transpose() + params.Sigma_a[l]);
      }

      KalmanGains g = kalman_gains(params.C_c[j], Ca, src_Pc_prior[t], Pa_pred,
                                   params.Sigma_m);
      if (g.regularized) ++out.regularization_events;
      const Vector e =
          y.col(t) - params.C_c[j] * src_xc_prior.col(t) - Ca * xa_pred;
      const Vector xa_post = xa_pred + g.K_a * e;
      const Matrix Pa_post = symmetrize((I_a - g.K_a * Ca) * Pa_pred);

      out.x_a_prior.col(t) = xa_pred;
      out.P_a_prior[t] = Pa_pred;
      out.x_a_hat.col(t) = xa_post;
      out.P_a[t] = Pa_post;
      out.K_a[t] = g.K_a;

      accum += xa_post.squaredNorm();
      if (!xa_post.allFinite() || accum / T > options.divergence_norm_cap) {
        throw DivergenceError(
            "filter_sweep: anticausal estimate diverged at t=" +
                std::to_string(t + 1),
            t + 1);
      }
      xa_next = xa_post;
      Pa_next = Pa_post;
    }

    // Forward pass: causal update against the fresh anticausal priors.
    Vector xc_prev = x_c0;
    Matrix Pc_prev;
    accum = 0.0;
    for (int t = 0; t < T; ++t) {
      const int j = assignment.s_c_hat[t];
      const int l = assignment.s_a_hat[t];
      const Matrix& Ac = params.A_c[j];
      const Matrix& Cc = params.C_c[j];

      const Vector xc_pred = Ac * xc_prev;
      Matrix Pc_pred;
      if (t == 0) {
        Pc_pred = options.boundary_exact ? params.Sigma_c[j]
                                         : Matrix(options.init_prior_scale * I_c);
      } else {
        Pc_pred = symmetrize(Ac * Pc_prev * Ac.transpose() + params.Sigma_c[j]);
      }

      KalmanGains g = kalman_gains(Cc, params.C_a[l], Pc_pred, out.P_a_prior[t],
                                   params.Sigma_m);
      if (g.regularized) ++out.regularization_events;
      const Vector e =
          y.col(t) - Cc * xc_pred - params.C_a[l] * out.x_a_prior.col(t);
      const Vector xc_post = xc_pred + g.K_c * e;
      const Matrix Pc_post = symmetrize((I_c - g.K_c * Cc) * Pc_pred);

      out.x_c_prior.col(t) = xc_pred;
      out.P_c_prior[t] = Pc_pred;
      out.x_c_hat.col(t) = xc_post;
      out.P_c[t] = Pc_post;
      out.K_c[t] = g.K_c;
      out.innovations.col(t) = e;
      out.S[t] = g.S;

      accum += xc_post.squaredNorm();
      if (!xc_post.allFinite() || accum / T > options.divergence_norm_cap) {
        throw DivergenceError(
            "filter_sweep: causal estimate diverged at t=" + std::to_string(t + 1),
            t + 1);
      }
      xc_prev = xc_post;
      Pc_prev = Pc_post;
    }

    // Further sweeps re-run the backward pass against the causal priors
    // this forward pass just produced.
    if (sweep + 1 < options.inner_sweeps) {
      src_xc_prior = out.x_c_prior;
      src_Pc_prior = out.P_c_prior;
    }
  }
  return out;
}

AssignSweepResult assign_filter_sweep(const ModelParams& params,
                                      const Matrix& y, const Vector& x_c0,
                                      const Vector& x_aT1,
                                      const FilterResult* prev,
                                      const ModeAssignment* prev_assign,
                                      const FilterOptions& options) {
  const Dims d = params.dims();
  const int T = static_cast<int>(y.cols());
  if (T < 1) throw ValidationError("assign_filter_sweep: empty data");
  if (y.rows() != d.n_y) {
    throw ValidationError("assign_filter_sweep: y row count does not match n_y");
  }
  if (x_c0.size() != d.n_xc || x_aT1.size() != d.n_xa) {
    throw ValidationError(
        "assign_filter_sweep: boundary state dimensions mismatch");
  }
  if (options.inner_sweeps < 1) {
    throw ValidationError("assign_filter_sweep: inner_sweeps must be >= 1");
  }
  if ((prev == nullptr) != (prev_assign == nullptr)) {
    throw ValidationError(
        "assign_filter_sweep: prev and prev_assign must be given together");
  }
  if (prev && (prev->T() != T || prev_assign->T() != T)) {
    throw ValidationError(
        "assign_filter_sweep: previous sweep has mismatched length");
  }
  if (prev) check_assignment(*prev_assign, d, T);

  const Matrix I_c = Matrix::Identity(d.n_xc, d.n_xc);
  const Matrix I_a = Matrix::Identity(d.n_xa, d.n_xa);

  AssignSweepResult out;
  FilterResult& f = out.filter;
  f.x_c_hat.resize(d.n_xc, T);
  f.x_a_hat.resize(d.n_xa, T);
  f.x_c_prior.resize(d.n_xc, T);
  f.x_a_prior.resize(d.n_xa, T);
  f.P_c.resize(T);
  f.P_a.resize(T);
  f.P_c_prior.resize(T);
  f.P_a_prior.resize(T);
  f.K_c.resize(T);
  f.K_a.resize(T);
  f.innovations.resize(d.n_y, T);
  f.S.resize(T);

  ModeAssignment& assign = out.assignment;
  assign.s_c_hat.assign(T, 0);
  assign.s_a_hat.assign(T, 0);
  assign.w_c = Matrix::Zero(T, d.m_c);
  assign.w_a = Matrix::Zero(T, d.m_a);

  Vector log_pi_c(d.m_c), log_pi_a(d.m_a);
  for (int j = 0; j < d.m_c; ++j) log_pi_c[j] = std::log(params.pi_c[j]);
  for (int l = 0; l < d.m_a; ++l) log_pi_a[l] = std::log(params.pi_a[l]);

  // Backward pass: choose s_a(t) per step, then update the anticausal state
  // with it; the causal side is held at the supplied (stale) predictions.
  auto backward_pass = [&](const Matrix& xc_src,
                           const std::vector<Matrix>& Pc_src,
                           const std::vector<int>& sc_src) {
    Vector xa_next = x_aT1;
    Matrix Pa_next;
    double accum = 0.0;
    for (int t = T - 1; t >= 0; --t) {
      const Matrix& Cc = params.C_c[sc_src[t]];
      const Vector yc_src = Cc * xc_src.col(t);
      const Matrix Sc_src = Cc * Pc_src[t] * Cc.transpose();

      int best_l = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      Vector best_pred;
      Matrix best_Ppred;
      for (int l = 0; l < d.m_a; ++l) {
        const Matrix& Aa = params.A_a[l];
        const Matrix& Ca = params.C_a[l];
        const Vector xa_pred = Aa * xa_next;
        Matrix Pa_pred;
        if (t == T - 1) {
          Pa_pred = options.boundary_exact
                        ? params.Sigma_a[l]
                        : Matrix(options.init_prior_scale * I_a);
        } else {
          Pa_pred =
              symmetrize(Aa * Pa_next * Aa.transpose() + params.Sigma_a[l]);
        }
        const Matrix S =
            symmetrize(Sc_src + Ca * Pa_pred * Ca.transpose() + params.Sigma_m);
        bool bumped = false;
        const Eigen::LLT<Matrix> llt = factor_innovation(S, &bumped);
        if (bumped) ++f.regularization_events;
        const Vector r = y.col(t) - yc_src - Ca * xa_pred;
        const double score =
            log_gaussian(r, llt, log_det_from_llt(llt)) + log_pi_a[l];
        if (score > best_score || l == 0) {
          best_score = score;
          best_l = l;
          best_pred = xa_pred;
          best_Ppred = Pa_pred;
        }
      }
      if (!std::isfinite(best_score)) {
        throw DivergenceError(
            "assign_filter_sweep: non-finite anticausal scores at t=" +
                std::to_string(t + 1),
            t + 1);
      }

      const Matrix& Ca = params.C_a[best_l];
      KalmanGains g =
          kalman_gains(Cc, Ca, Pc_src[t], best_Ppred, params.Sigma_m);
      if (g.regularized) ++f.regularization_events;
      const Vector e = y.col(t) - yc_src - Ca * best_pred;
      const Vector xa_post = best_pred + g.K_a * e;
      const Matrix Pa_post = symmetrize((I_a - g.K_a * Ca) * best_Ppred);

      assign.s_a_hat[t] = best_l;
      f.x_a_prior.col(t) = best_pred;
      f.P_a_prior[t] = best_Ppred;
      f.x_a_hat.col(t) = xa_post;
      f.P_a[t] = Pa_post;
      f.K_a[t] = g.K_a;

      accum += xa_post.squaredNorm();
      if (!xa_post.allFinite() || accum / T > options.divergence_norm_cap) {
        throw DivergenceError(
            "assign_filter_sweep: anticausal estimate diverged at t=" +
                std::to_string(t + 1),
            t + 1);
      }
      xa_next = xa_post;
      Pa_next = Pa_post;
    }
  };

  // Forward pass: choose s_c(t) per step against the supplied anticausal
  // side, then update the causal state with it.
  auto forward_pass = [&](const Matrix& xa_src,
                          const std::vector<Matrix>& Pa_src,
                          const std::vector<int>& sa_src) {
    Vector xc_prev = x_c0;
    Matrix Pc_prev;
    double accum = 0.0;
    for (int t = 0; t < T; ++t) {
      const Matrix& Ca = params.C_a[sa_src[t]];
      const Vector ya = Ca * xa_src.col(t);
      const Matrix Sa = Ca * Pa_src[t] * Ca.transpose();

      int best_j = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      Vector best_pred;
      Matrix best_Ppred;
      for (int j = 0; j < d.m_c; ++j) {
        const Matrix& Ac = params.A_c[j];
        const Matrix& Cc = params.C_c[j];
        const Vector xc_pred = Ac * xc_prev;
        Matrix Pc_pred;
        if (t == 0) {
          Pc_pred = options.boundary_exact
                        ? params.Sigma_c[j]
                        : Matrix(options.init_prior_scale * I_c);
        } else {
          Pc_pred =
              symmetrize(Ac * Pc_prev * Ac.transpose() + params.Sigma_c[j]);
        }
        const Matrix S =
            symmetrize(Cc * Pc_pred * Cc.transpose() + Sa + params.Sigma_m);
        bool bumped = false;
        const Eigen::LLT<Matrix> llt = factor_innovation(S, &bumped);
        if (bumped) ++f.regularization_events;
        const Vector r = y.col(t) - Cc * xc_pred - ya;
        const double score =
            log_gaussian(r, llt, log_det_from_llt(llt)) + log_pi_c[j];
        if (score > best_score || j == 0) {
          best_score = score;
          best_j = j;
          best_pred = xc_pred;
          best_Ppred = Pc_pred;
        }
      }
      if (!std::isfinite(best_score)) {
        throw DivergenceError(
            "assign_filter_sweep: non-finite causal scores at t=" +
                std::to_string(t + 1),
            t + 1);
      }

      const Matrix& Cc = params.C_c[best_j];
      KalmanGains g =
          kalman_gains(Cc, Ca, best_Ppred, Pa_src[t], params.Sigma_m);
      if (g.regularized) ++f.regularization_events;
      const Vector e = y.col(t) - Cc * best_pred - ya;
      const Vector xc_post = best_pred + g.K_c * e;
      const Matrix Pc_post = symmetrize((I_c - g.K_c * Cc) * best_Ppred);

      assign.s_c_hat[t] = best_j;
      f.x_c_prior.col(t) = best_pred;
      f.P_c_prior[t] = best_Ppred;
      f.x_c_hat.col(t) = xc_post;
      f.P_c[t] = Pc_post;
      f.K_c[t] = g.K_c;
      f.innovations.col(t) = e;
      f.S[t] = g.S;

      accum += xc_post.squaredNorm();
      if (!xc_post.allFinite() || accum / T > options.divergence_norm_cap) {
        throw DivergenceError(
            "assign_filter_sweep: causal estimate diverged at t=" +
                std::to_string(t + 1),
            t + 1);
      }
      xc_prev = xc_post;
      Pc_prev = Pc_post;
    }
  };

  // Causal side consumed by the first backward pass. With no previous sweep,
  // bootstrap with a forward pass that treats the anticausal share as diffuse
  // noise: the causal chain is anchored at its known boundary, so this yields
  // usable causal predictions, whereas starting backward would fold the whole
  // unexplained causal signal into the anticausal estimates.
  Matrix src_xc_prior;
  std::vector<Matrix> src_Pc_prior;
  std::vector<int> src_sc;
  if (prev) {
    src_xc_prior = prev->x_c_prior;
    src_Pc_prior = prev->P_c_prior;
    src_sc = prev_assign->s_c_hat;
  } else {
    forward_pass(Matrix::Zero(d.n_xa, T),
                 std::vector<Matrix>(T, options.init_prior_scale * I_a),
                 std::vector<int>(T, argmax_lowest(params.pi_a)));
    src_xc_prior = f.x_c_prior;
    src_Pc_prior = f.P_c_prior;
    src_sc = assign.s_c_hat;
  }

  for (int sweep = 0; sweep < options.inner_sweeps; ++sweep) {
    backward_pass(src_xc_prior, src_Pc_prior, src_sc);
    forward_pass(f.x_a_prior, f.P_a_prior, assign.s_a_hat);
    if (sweep + 1 < options.inner_sweeps) {
      src_xc_prior = f.x_c_prior;
      src_Pc_prior = f.P_c_prior;
      src_sc = assign.s_c_hat;
    }
  }

  for (int t = 0; t < T; ++t) {
    assign.w_c(t, assign.s_c_hat[t]) = 1.0;
    assign.w_a(t, assign.s_a_hat[t]) = 1.0;
  }
  return out;
}

QValue evaluate_Q(const ModelParams& candidate, const ModeAssignment& assignment,
                  const FilterResult& filter, const Matrix& y,
                  const Vector& x_c0, const Vector& x_aT1,
                  const QOptions& options) {
  const Dims d = candidate.dims();
  const int T = static_cast<int>(y.cols());
  if (filter.T() != T) {
    throw ValidationError("evaluate_Q: filter length does not match data");
  }
  check_assignment(assignment, d, T);

  auto factor_named = [](const Matrix& sigma, const std::string& name) {
    Eigen::LLT<Matrix> llt(symmetrize(sigma));
    if (llt.info() != Eigen::Success) {
      // Degenerate covariances get a bump like the filter's, scaled to the
      // matrix so noiseless working models and badly conditioned mid-run
      // iterates both stay scoreable.
      const double scale =
          sigma.allFinite() ? std::max(1.0, sigma.diagonal().maxCoeff()) : 1.0;
      llt.compute(symmetrize(sigma) +
                  internal::kCovBump * scale *
                      Matrix::Identity(sigma.rows(), sigma.cols()));
      if (llt.info() != Eigen::Success) {
        throw DivergenceError("evaluate_Q: " + name +
                              " is not factorizable; the iterate collapsed",
                              0);
      }
    }
    return llt;
  };

  std::vector<Eigen::LLT<Matrix>> llt_c, llt_a;
  std::vector<double> logdet_c, logdet_a;
  for (int j = 0; j < d.m_c; ++j) {
    llt_c.push_back(
        factor_named(candidate.Sigma_c[j], "Sigma_c[" + std::to_string(j + 1) + "]"));
    logdet_c.push_back(log_det_from_llt(llt_c.back()));
  }
  for (int l = 0; l < d.m_a; ++l) {
    llt_a.push_back(
        factor_named(candidate.Sigma_a[l], "Sigma_a[" + std::to_string(l + 1) + "]"));
    logdet_a.push_back(log_det_from_llt(llt_a.back()));
  }
  const Eigen::LLT<Matrix> llt_m = factor_named(candidate.Sigma_m, "Sigma_m");
  const double logdet_m = log_det_from_llt(llt_m);

  QValue q;
  for (int t = 0; t < T; ++t) {
    const int j = assignment.s_c_hat[t];
    const int l = assignment.s_a_hat[t];
    const Matrix& Cc = candidate.C_c[j];
    const Matrix& Ca = candidate.C_a[l];

    const Vector r = y.col(t) - Cc * filter.x_c_hat.col(t) -
                     Ca * filter.x_a_hat.col(t);
    q.q1 += log_gaussian(r, llt_m, logdet_m);
    if (options.include_trace_terms) {
      q.q1 -= 0.5 * (llt_m.solve(Cc * filter.P_c[t] * Cc.transpose()).trace() +
                     llt_m.solve(Ca * filter.P_a[t] * Ca.transpose()).trace());
    }

    const Vector xc_lag = (t == 0) ? x_c0 : Vector(filter.x_c_hat.col(t - 1));
    const Vector dc = filter.x_c_hat.col(t) - candidate.A_c[j] * xc_lag;
    q.q2 += std::log(candidate.pi_c[j]) + log_gaussian(dc, llt_c[j], logdet_c[j]);
    if (options.include_trace_terms) {
      q.q2 -= 0.5 * llt_c[j].solve(filter.P_c[t]).trace();
    }

    const Vector xa_lead =
        (t == T - 1) ? x_aT1 : Vector(filter.x_a_hat.col(t + 1));
    const Vector da = filter.x_a_hat.col(t) - candidate.A_a[l] * xa_lead;
    q.q3 += std::log(candidate.pi_a[l]) + log_gaussian(da, llt_a[l], logdet_a[l]);
    if (options.include_trace_terms) {
      q.q3 -= 0.5 * llt_a[l].solve(filter.P_a[t]).trace();
    }
  }
  q.q_total = q.q1 + q.q2 + q.q3;
  return q;
}

SmoothResult smooth_fixed_params(const ModelParams& params, const Matrix& y,
                                 const Vector& x_c0, const Vector& x_aT1,
                                 const FilterOptions& options,
                                 int max_passes) {
  if (max_passes < 1) {
    throw ValidationError("smooth_fixed_params: max_passes must be >= 1");
  }
  SmoothResult out;
  AssignSweepResult sw =
      assign_filter_sweep(params, y, x_c0, x_aT1, nullptr, nullptr, options);
  out.passes = 1;
  for (int k = 1; k < max_passes; ++k) {
    AssignSweepResult next = assign_filter_sweep(params, y, x_c0, x_aT1,
                                                 &sw.filter, &sw.assignment,
                                                 options);
    const bool same = next.assignment.s_c_hat == sw.assignment.s_c_hat &&
                      next.assignment.s_a_hat == sw.assignment.s_a_hat;
    sw = std::move(next);
    ++out.passes;
    if (same) {
      out.converged = true;
      break;
    }
  }
  out.assignment = std::move(sw.assignment);
  out.filter = std::move(sw.filter);
  return out;
}

}  // namespace ncrsm
