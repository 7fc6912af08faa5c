#include "ncrsm/em.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "internal.hpp"
#include "ncrsm/rng.hpp"

namespace ncrsm {

namespace {

// Substream index space under the master seed: 0x100 + r seeds restart r.
// (Indices 0-4 belong to the simulator.)
constexpr std::uint64_t kRestartStreamBase = 0x100;

std::mutex g_progress_mutex;

void jitter_entries(Matrix& m, Rng& rng, double scale) {
  for (int c = 0; c < m.cols(); ++c) {
    for (int r = 0; r < m.rows(); ++r) m(r, c) += scale * rng.uniform(-1.0, 1.0);
  }
}

Vector uniform_simplex(int m) {
  Vector pi = Vector::Constant(m, 1.0 / m);
  pi[m - 1] = 1.0 - (m - 1) * (1.0 / m);
  return pi;
}

double centered_index(int i, int m) { return i - 0.5 * (m - 1); }

// Least-squares fit of y(t) on a lag/lead embedding of the first output
// channel: n_xc lags feed the causal block, n_xa leads the anticausal one.
// Purely an initialization heuristic.
void lag_embedding_fit(const Matrix& y, const Dims& dims, Matrix& B_c,
                       Matrix& B_a) {
  const int T = static_cast<int>(y.cols());
  const int p = dims.n_xc + dims.n_xa;
  const int t_begin = dims.n_xc;
  const int t_end = T - dims.n_xa;  // exclusive
  const int n_t = t_end - t_begin;

  Matrix gram = Matrix::Zero(p, p);
  Matrix rhs = Matrix::Zero(p, dims.n_y);
  Vector z(p);
  for (int t = t_begin; t < t_end; ++t) {
    for (int k = 0; k < dims.n_xc; ++k) z[k] = y(0, t - 1 - k);
    for (int k = 0; k < dims.n_xa; ++k) z[dims.n_xc + k] = y(0, t + 1 + k);
    gram.noalias() += z * z.transpose();
    rhs.noalias() += z * y.col(t).transpose();
  }
  gram += (1e-9 * n_t) * Matrix::Identity(p, p);
  const Matrix coeff =
      Eigen::LDLT<Matrix>(gram).solve(rhs).transpose();  // n_y x p
  B_c = coeff.leftCols(dims.n_xc);
  B_a = coeff.rightCols(dims.n_xa);
}

double pooled_variance(const Matrix& y) {
  const double mean = y.mean();
  const double var = (y.array() - mean).square().mean();
  return std::max(var, 1e-6);
}

struct RestartOutcome {
  EmReport report;
  bool failed = false;
  std::string fail_message;
  double final_ll = -std::numeric_limits<double>::infinity();
};

}  // namespace

const char* to_string(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::kRandomPerturb: return "random-perturb";
    case InitScheme::kUserSupplied: return "user-supplied";
    case InitScheme::kDataDriven: return "data-driven";
  }
  return "unknown";
}

const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kConverged: return "converged";
    case StopReason::kMaxIters: return "max-iters";
    case StopReason::kDivergence: return "divergence";
  }
  return "unknown";
}

InitScheme init_scheme_from_string(const std::string& name) {
  if (name == "random-perturb") return InitScheme::kRandomPerturb;
  if (name == "user-supplied") return InitScheme::kUserSupplied;
  if (name == "data-driven") return InitScheme::kDataDriven;
  throw ValidationError("unknown init scheme: " + name);
}

ModelParams initialize(const Matrix& y, const Dims& dims, const EmConfig& config,
                       std::uint64_t restart_seed) {
  if (!dims.valid()) throw ValidationError("initialize: invalid dims");
  const int T = static_cast<int>(y.cols());
  const int min_T = 10 * (dims.n_xc + dims.n_xa);
  if (T < min_T) {
    std::ostringstream os;
    os << "initialize: need at least " << min_T << " samples, got " << T;
    throw ValidationError(os.str());
  }
  if (y.rows() != dims.n_y) {
    throw ValidationError("initialize: y row count does not match n_y");
  }

  if (config.init_scheme == InitScheme::kUserSupplied) {
    ModelParams p = config.user_init;
    // Semi-definite covariances are a legitimate starting point (noiseless
    // working model); the filter regularizes singular innovations itself.
    validate_or_throw(p, dims, /*require_positive_definite=*/false);
    if (config.user_init_jitter != 0.0) {
      Rng rng = Rng::stream(restart_seed, 7);
      for (auto& m : p.A_c) jitter_entries(m, rng, config.user_init_jitter);
      for (auto& m : p.A_a) jitter_entries(m, rng, config.user_init_jitter);
      for (auto& m : p.C_c) jitter_entries(m, rng, config.user_init_jitter);
      for (auto& m : p.C_a) jitter_entries(m, rng, config.user_init_jitter);
    }
    return p;
  }

  Matrix B_c, B_a;
  lag_embedding_fit(y, dims, B_c, B_a);
  const double var = pooled_variance(y);

  ModelParams p;
  p.Sigma_m = var * Matrix::Identity(dims.n_y, dims.n_y);
  p.Sigma_c.assign(dims.m_c, var * Matrix::Identity(dims.n_xc, dims.n_xc));
  p.Sigma_a.assign(dims.m_a, var * Matrix::Identity(dims.n_xa, dims.n_xa));
  p.pi_c = uniform_simplex(dims.m_c);
  p.pi_a = uniform_simplex(dims.m_a);
  p.A_c.resize(dims.m_c);
  p.A_a.resize(dims.m_a);
  p.C_c.resize(dims.m_c);
  p.C_a.resize(dims.m_a);

  const Matrix I_c = Matrix::Identity(dims.n_xc, dims.n_xc);
  const Matrix I_a = Matrix::Identity(dims.n_xa, dims.n_xa);

  if (config.init_scheme == InitScheme::kRandomPerturb) {
    Rng rng = Rng::stream(restart_seed, 11);
    auto random_a = [&rng](const Matrix& eye) {
      Matrix a = 0.5 * eye;
      jitter_entries(a, rng, 0.2);
      return a;
    };
    auto random_c = [&rng](const Matrix& base) {
      Matrix c = base;
      for (int cc = 0; cc < c.cols(); ++cc) {
        for (int rr = 0; rr < c.rows(); ++rr) {
          c(rr, cc) *= 1.0 + 0.25 * rng.uniform(-1.0, 1.0);
        }
      }
      return c;
    };
    for (int j = 0; j < dims.m_c; ++j) {
      p.A_c[j] = random_a(I_c);
      p.C_c[j] = random_c(B_c);
    }
    for (int l = 0; l < dims.m_a; ++l) {
      p.A_a[l] = random_a(I_a);
      p.C_a[l] = random_c(B_a);
    }
    return p;
  }

  // data-driven: deterministic per-mode scaling of the embedding fit, plus a
  // faint seeded perturbation so restarts explore distinct basins.
  Rng rng = Rng::stream(restart_seed, 13);
  for (int j = 0; j < dims.m_c; ++j) {
    p.A_c[j] = (0.5 + 0.1 * centered_index(j, dims.m_c)) * I_c;
    p.C_c[j] = (1.0 + 0.15 * centered_index(j, dims.m_c)) * B_c;
    jitter_entries(p.A_c[j], rng, 0.01);
    jitter_entries(p.C_c[j], rng, 0.01);
  }
  for (int l = 0; l < dims.m_a; ++l) {
    p.A_a[l] = (0.5 + 0.1 * centered_index(l, dims.m_a)) * I_a;
    p.C_a[l] = (1.0 + 0.15 * centered_index(l, dims.m_a)) * B_a;
    jitter_entries(p.A_a[l], rng, 0.01);
    jitter_entries(p.C_a[l], rng, 0.01);
  }
  return p;
}

double observed_loglik(const ModelParams& params,
                       const ModeAssignment& assignment,
                       const FilterResult& filter, const Matrix& y) {
  const int T = static_cast<int>(y.cols());
  if (filter.T() != T || assignment.T() != T) {
    throw ValidationError("observed_loglik: input lengths do not match");
  }
  double ll = 0.0;
  for (int t = 0; t < T; ++t) {
    const int j = assignment.s_c_hat[t];
    const int l = assignment.s_a_hat[t];
    const Matrix& Cc = params.C_c[j];
    const Matrix& Ca = params.C_a[l];
    const Matrix S =
        symmetrize(Cc * filter.P_c_prior[t] * Cc.transpose() +
                   Ca * filter.P_a_prior[t] * Ca.transpose() + params.Sigma_m);
    const Vector e = y.col(t) - Cc * filter.x_c_prior.col(t) -
                     Ca * filter.x_a_prior.col(t);
    const Eigen::LLT<Matrix> llt = internal::factor_innovation(S, nullptr);
    ll += internal::log_gaussian(e, llt, internal::log_det_from_llt(llt));
    if (!std::isfinite(ll)) {
      throw DivergenceError(
          "observed_loglik: non-finite contribution at t=" + std::to_string(t + 1),
          t + 1);
    }
  }
  return ll;
}

namespace {

RestartOutcome run_restart(const Matrix& y, const Vector& x_c0,
                           const Vector& x_aT1, const Dims& dims,
                           const EmConfig& config, int restart_index) {
  RestartOutcome outcome;
  EmReport& rep = outcome.report;

  EmConfig local = config;
  if (config.init_scheme == InitScheme::kUserSupplied && restart_index == 0) {
    local.user_init_jitter = 0.0;  // restart 0 starts exactly at the supplied point
  }
  const std::uint64_t restart_seed =
      substream_seed(config.seed, kRestartStreamBase + restart_index);

  FilterOptions fopts;
  fopts.init_prior_scale = config.init_prior_scale;
  fopts.boundary_exact = config.boundary_exact_prior;
  fopts.inner_sweeps = config.inner_sweeps;
  fopts.divergence_norm_cap = config.divergence_norm_cap;
  MStepOptions mopts;
  mopts.ridge = config.ridge;
  mopts.sigma_floor = config.sigma_floor;
  mopts.prob_floor = config.mode_prob_floor;

  try {
    ModelParams params = initialize(y, dims, local, restart_seed);
    validate_or_throw(params, dims, /*require_positive_definite=*/false);

    // The first sweep establishes the baseline iterate; a failure here is a
    // restart failure, there being no earlier state to fall back on.
    AssignSweepResult best =
        assign_filter_sweep(params, y, x_c0, x_aT1, nullptr, nullptr, fopts);
    double ll_best = observed_loglik(params, best.assignment, best.filter, y);
    int m_steps_done = 0;

    // Proposal gate. Hard assignment plus least-squares refits do not carry
    // an ascent guarantee the way exact EM does: a composite step can lower
    // the observed log-likelihood outright (refits against smoothed states
    // understate prediction uncertainty). Every candidate therefore runs a
    // chained sweep and is accepted only if the log-likelihood does not
    // decrease; a candidate that diverges counts as rejected. The comparison
    // rejects NaN.
    auto propose = [&](const ModelParams& cand) -> bool {
      try {
        AssignSweepResult sw = assign_filter_sweep(
            cand, y, x_c0, x_aT1, &best.filter, &best.assignment, fopts);
        const double ll = observed_loglik(cand, sw.assignment, sw.filter, y);
        if (!(ll >= ll_best)) return false;
        params = cand;
        best = std::move(sw);
        ll_best = ll;
        return true;
      } catch (const DivergenceError&) {
        return false;
      }
    };

    auto log_progress = [&](int k, double dll, int accepted) {
      if (!config.progress) return;
      std::lock_guard<std::mutex> lock(g_progress_mutex);
      std::ostream& os = *config.progress;
      os << "restart=" << restart_index << " iter=" << k
         << " loglik=" << ll_best;
      if (k > 0) os << " dloglik=" << dll << " accepted=" << accepted;
      os << '\n' << std::flush;
    };

    rep.loglik_trace.push_back(ll_best);
    rep.q_trace.push_back(
        evaluate_Q(params, best.assignment, best.filter, y, x_c0, x_aT1));
    log_progress(0, 0.0, 0);
    rep.stop_reason = StopReason::kMaxIters;

    for (int k = 1; k <= config.max_iters; ++k) {
      const double ll_start = ll_best;
      int accepted = 0;

      // One more sweep at the current parameters first: assignment and
      // state refinement is worth keeping even when no parameter update
      // survives the gate, and the refit below then sees fresher states.
      accepted += propose(params) ? 1 : 0;

      const MStepResult ms =
          m_step(best.assignment, best.filter, y, x_c0, x_aT1, params, mopts);
      ++m_steps_done;
      if (propose(ms.params)) {
        ++accepted;
      } else {
        // The combined update lost; salvage the blocks that help, each
        // against the running best (probabilities, dynamics, output maps,
        // covariances in that order).
        ModelParams cand = params;
        cand.pi_c = ms.params.pi_c;
        cand.pi_a = ms.params.pi_a;
        accepted += propose(cand) ? 1 : 0;

        cand = params;
        cand.A_c = ms.params.A_c;
        cand.A_a = ms.params.A_a;
        accepted += propose(cand) ? 1 : 0;

        cand = params;
        cand.C_c = ms.params.C_c;
        cand.C_a = ms.params.C_a;
        accepted += propose(cand) ? 1 : 0;

        cand = params;
        cand.Sigma_c = ms.params.Sigma_c;
        cand.Sigma_a = ms.params.Sigma_a;
        cand.Sigma_m = ms.params.Sigma_m;
        accepted += propose(cand) ? 1 : 0;
      }

      const double dll = ll_best - ll_start;
      log_progress(k, dll, accepted);

      // Safety net: the gate makes a decrease impossible, so a trip here is
      // a logic error worth loud diagnostics, not a silent continue.
      if (dll < -config.monotonicity_tol * std::abs(ll_start)) {
        rep.stop_reason = StopReason::kDivergence;
        std::ostringstream os;
        os << "log-likelihood decreased at iteration " << k << ": " << ll_start
           << " -> " << ll_best << " (delta " << dll
           << " exceeds tolerance) despite the proposal gate";
        rep.diagnostics = os.str();
        break;
      }

      rep.loglik_trace.push_back(ll_best);
      rep.q_trace.push_back(
          evaluate_Q(params, best.assignment, best.filter, y, x_c0, x_aT1));

      if (std::abs(dll) <=
          config.tol_loglik * std::max(1.0, std::abs(ll_start))) {
        rep.stop_reason = StopReason::kConverged;
        break;
      }
    }

    rep.final_params = std::move(params);
    rep.final_assignment = std::move(best.assignment);
    rep.final_filter = std::move(best.filter);
    rep.iterations = m_steps_done;
    rep.restart_index_chosen = restart_index;
    outcome.final_ll = rep.loglik_trace.back();
  } catch (const DivergenceError& e) {
    outcome.failed = true;
    outcome.fail_message = e.what();
  }
  return outcome;
}

}  // namespace

EmReport run(const Matrix& y, const Vector& x_c0, const Vector& x_aT1,
             const Dims& dims, const EmConfig& config) {
  if (!dims.valid()) throw ValidationError("run: invalid dims");
  if (y.rows() != dims.n_y || y.cols() < 1) {
    throw ValidationError("run: data shape does not match dims");
  }
  if (x_c0.size() != dims.n_xc || x_aT1.size() != dims.n_xa) {
    throw ValidationError("run: boundary state dimensions mismatch");
  }
  if (config.max_iters < 1 || config.restarts < 1 || config.inner_sweeps < 1 ||
      config.jobs < 1 || config.tol_loglik <= 0.0 ||
      config.divergence_norm_cap <= 0.0) {
    throw ValidationError("run: invalid EM configuration");
  }
  if (!y.allFinite()) throw ValidationError("run: data contains non-finite values");

  std::vector<RestartOutcome> outcomes(config.restarts);
  const int workers = std::min(config.jobs, config.restarts);
  if (workers <= 1) {
    for (int r = 0; r < config.restarts; ++r) {
      outcomes[r] = run_restart(y, x_c0, x_aT1, dims, config, r);
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int r = next.fetch_add(1); r < config.restarts;
             r = next.fetch_add(1)) {
          outcomes[r] = run_restart(y, x_c0, x_aT1, dims, config, r);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  int best = -1;
  int failed = 0;
  for (int r = 0; r < config.restarts; ++r) {
    if (outcomes[r].failed) {
      ++failed;
      continue;
    }
    if (best < 0 || outcomes[r].final_ll > outcomes[best].final_ll) best = r;
  }
  if (best < 0) {
    throw DivergenceError("run: every restart diverged; first failure: " +
                          outcomes[0].fail_message);
  }
  EmReport rep = std::move(outcomes[best].report);
  rep.restart_index_chosen = best;
  rep.restarts_failed = failed;
  return rep;
}

}  // namespace ncrsm
