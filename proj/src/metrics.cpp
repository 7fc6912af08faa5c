#include "ncrsm/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <thread>

#include "ncrsm/estep.hpp"
#include "ncrsm/mstep.hpp"
#include "ncrsm/simulator.hpp"

namespace ncrsm {

namespace {

constexpr int kMaxModesForSearch = 5;

std::vector<std::vector<int>> all_permutations(int m) {
  std::vector<int> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<std::vector<int>> perms;
  do {
    perms.push_back(idx);
  } while (std::next_permutation(idx.begin(), idx.end()));
  return perms;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void append_field(std::string& row, double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  row += buf;
}

}  // namespace

double match_rate(const std::vector<int>& true_seq,
                  const std::vector<int>& est_seq, int n_modes) {
  if (true_seq.size() != est_seq.size()) {
    throw ValidationError("match_rate: sequence lengths differ");
  }
  if (true_seq.empty()) throw ValidationError("match_rate: empty sequences");
  if (n_modes < 1 || n_modes > kMaxModesForSearch) {
    throw ValidationError("match_rate: mode count outside supported range");
  }
  const std::size_t T = true_seq.size();
  double best = 0.0;
  for (const auto& perm : all_permutations(n_modes)) {
    std::size_t hits = 0;
    for (std::size_t t = 0; t < T; ++t) {
      if (true_seq[t] == perm[est_seq[t]]) ++hits;
    }
    best = std::max(best, static_cast<double>(hits) / T);
  }
  return best;
}

double rel_state_error(const Matrix& x_true, const Matrix& x_hat) {
  if (x_true.rows() != x_hat.rows() || x_true.cols() != x_hat.cols()) {
    throw ValidationError("rel_state_error: shapes differ");
  }
  const double denom = x_true.squaredNorm();
  if (denom <= 0.0) {
    throw ValidationError("rel_state_error: true state sequence has zero norm");
  }
  return (x_true - x_hat).squaredNorm() / denom;
}

double inf_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

ParamErrorTable param_error(const ModelParams& params_true,
                            const ModelParams& params_est) {
  const Dims d = params_true.dims();
  if (!(params_est.dims() == d)) {
    throw ValidationError("param_error: models have different dimensions");
  }
  if (d.m_c > kMaxModesForSearch || d.m_a > kMaxModesForSearch) {
    throw ValidationError("param_error: mode count outside supported range");
  }

  const auto perms_c = all_permutations(d.m_c);
  const auto perms_a = all_permutations(d.m_a);

  auto evaluate = [&](const std::vector<int>& pc, const std::vector<int>& pa) {
    ParamErrorTable t;
    t.perm_c = pc;
    t.perm_a = pa;
    t.err_A_c.resize(d.m_c);
    t.err_C_c.resize(d.m_c);
    t.err_Sigma_c.resize(d.m_c);
    t.err_A_a.resize(d.m_a);
    t.err_C_a.resize(d.m_a);
    t.err_Sigma_a.resize(d.m_a);
    Vector pi_c_perm(d.m_c), pi_a_perm(d.m_a);
    for (int j = 0; j < d.m_c; ++j) {
      t.err_A_c[j] = inf_norm(params_true.A_c[j] - params_est.A_c[pc[j]]);
      t.err_C_c[j] = inf_norm(params_true.C_c[j] - params_est.C_c[pc[j]]);
      t.err_Sigma_c[j] =
          inf_norm(params_true.Sigma_c[j] - params_est.Sigma_c[pc[j]]);
      pi_c_perm[j] = params_est.pi_c[pc[j]];
    }
    for (int l = 0; l < d.m_a; ++l) {
      t.err_A_a[l] = inf_norm(params_true.A_a[l] - params_est.A_a[pa[l]]);
      t.err_C_a[l] = inf_norm(params_true.C_a[l] - params_est.C_a[pa[l]]);
      t.err_Sigma_a[l] =
          inf_norm(params_true.Sigma_a[l] - params_est.Sigma_a[pa[l]]);
      pi_a_perm[l] = params_est.pi_a[pa[l]];
    }
    t.err_Sigma_m = inf_norm(params_true.Sigma_m - params_est.Sigma_m);
    t.err_pi_c = (params_true.pi_c - pi_c_perm).cwiseAbs().maxCoeff();
    t.err_pi_a = (params_true.pi_a - pi_a_perm).cwiseAbs().maxCoeff();
    t.total = t.err_Sigma_m + t.err_pi_c + t.err_pi_a;
    for (double e : t.err_A_c) t.total += e;
    for (double e : t.err_C_c) t.total += e;
    for (double e : t.err_Sigma_c) t.total += e;
    for (double e : t.err_A_a) t.total += e;
    for (double e : t.err_C_a) t.total += e;
    for (double e : t.err_Sigma_a) t.total += e;
    return t;
  };

  ParamErrorTable best;
  bool first = true;
  for (const auto& pc : perms_c) {
    for (const auto& pa : perms_a) {
      ParamErrorTable cand = evaluate(pc, pa);
      if (first || cand.total < best.total) {
        best = std::move(cand);
        first = false;
      }
    }
  }
  return best;
}

namespace {

// One-hot assignment straight from a known switching sequence.
ModeAssignment assignment_from_sequence(const SwitchingSequence& seq, int m_c,
                                        int m_a) {
  ModeAssignment a;
  const int T = seq.T();
  a.s_c_hat = seq.s_c;
  a.s_a_hat = seq.s_a;
  a.w_c = Matrix::Zero(T, m_c);
  a.w_a = Matrix::Zero(T, m_a);
  for (int t = 0; t < T; ++t) {
    a.w_c(t, seq.s_c[t]) = 1.0;
    a.w_a(t, seq.s_a[t]) = 1.0;
  }
  return a;
}

RateRun rate_run(const RateExperimentConfig& config, int T,
                 std::uint64_t seed) {
  const Dims d = config.params_true.dims();
  RateRun run;
  run.T = T;
  run.seed = seed;
  run.bound = std::sqrt(std::log(static_cast<double>(T)) / T);

  try {
    const SwitchingSequence seq =
        draw_switching(config.params_true, T, seed);
    const Trajectory traj =
        simulate(config.params_true, seq, config.x_c0, config.x_aT1, seed);

    ModelParams est;
    bool aligned_labels = true;
    if (config.oracle_mode) {
      const ModeAssignment assign = assignment_from_sequence(seq, d.m_c, d.m_a);
      FilterResult states;
      states.x_c_hat = traj.x_c_true;
      states.x_a_hat = traj.x_a_true;
      MStepOptions mopts;
      AUpdate a = update_A(assign, states, traj.x_c0, traj.x_aT1,
                           config.params_true, mopts);
      CUpdate c = update_C(assign, states, traj.y, d, mopts);
      SigmaUpdate s =
          update_Sigma(assign, states, traj.y, traj.x_c0, traj.x_aT1, a.A_c,
                       a.A_a, c.C_c, c.C_a, config.params_true, mopts);
      est.A_c = std::move(a.A_c);
      est.A_a = std::move(a.A_a);
      est.C_c = std::move(c.C_c);
      est.C_a = std::move(c.C_a);
      est.Sigma_c = std::move(s.Sigma_c);
      est.Sigma_a = std::move(s.Sigma_a);
      est.Sigma_m = std::move(s.Sigma_m);
      est.pi_c = config.params_true.pi_c;
      est.pi_a = config.params_true.pi_a;
    } else {
      EmConfig em = config.em;
      em.seed = seed;
      est = ncrsm::run(traj.y, traj.x_c0, traj.x_aT1, d, em).final_params;
      aligned_labels = false;
    }

    run.err_A_c.resize(d.m_c);
    run.err_C_c.resize(d.m_c);
    run.err_Sigma_c.resize(d.m_c);
    run.err_A_a.resize(d.m_a);
    run.err_C_a.resize(d.m_a);
    run.err_Sigma_a.resize(d.m_a);
    if (aligned_labels) {
      for (int j = 0; j < d.m_c; ++j) {
        run.err_A_c[j] = inf_norm(config.params_true.A_c[j] - est.A_c[j]);
        run.err_C_c[j] = inf_norm(config.params_true.C_c[j] - est.C_c[j]);
        run.err_Sigma_c[j] =
            inf_norm(config.params_true.Sigma_c[j] - est.Sigma_c[j]);
      }
      for (int l = 0; l < d.m_a; ++l) {
        run.err_A_a[l] = inf_norm(config.params_true.A_a[l] - est.A_a[l]);
        run.err_C_a[l] = inf_norm(config.params_true.C_a[l] - est.C_a[l]);
        run.err_Sigma_a[l] =
            inf_norm(config.params_true.Sigma_a[l] - est.Sigma_a[l]);
      }
      run.err_Sigma_m = inf_norm(config.params_true.Sigma_m - est.Sigma_m);
    } else {
      const ParamErrorTable t = param_error(config.params_true, est);
      run.err_A_c = t.err_A_c;
      run.err_C_c = t.err_C_c;
      run.err_Sigma_c = t.err_Sigma_c;
      run.err_A_a = t.err_A_a;
      run.err_C_a = t.err_C_a;
      run.err_Sigma_a = t.err_Sigma_a;
      run.err_Sigma_m = t.err_Sigma_m;
    }
    run.max_A_error = 0.0;
    for (double e : run.err_A_c) run.max_A_error = std::max(run.max_A_error, e);
    for (double e : run.err_A_a) run.max_A_error = std::max(run.max_A_error, e);
    run.ratio = run.max_A_error / run.bound;
  } catch (const DivergenceError&) {
    run.diverged = true;
  }
  return run;
}

}  // namespace

RateExperiment rate_experiment(const RateExperimentConfig& config) {
  if (config.T_grid.size() < 3) {
    throw ValidationError("rate_experiment: T_grid must have length >= 3");
  }
  for (std::size_t i = 1; i < config.T_grid.size(); ++i) {
    if (config.T_grid[i] <= config.T_grid[i - 1]) {
      throw ValidationError("rate_experiment: T_grid must be strictly increasing");
    }
  }
  if (config.seeds.empty()) {
    throw ValidationError("rate_experiment: no seeds given");
  }
  const Dims d = config.params_true.dims();
  RateExperimentConfig cfg = config;
  if (cfg.x_c0.size() == 0) cfg.x_c0 = Vector::Zero(d.n_xc);
  if (cfg.x_aT1.size() == 0) cfg.x_aT1 = Vector::Zero(d.n_xa);

  RateExperiment out;
  out.T_grid = cfg.T_grid;
  out.oracle_mode = cfg.oracle_mode;
  const int n_T = static_cast<int>(cfg.T_grid.size());
  const int n_seeds = static_cast<int>(cfg.seeds.size());
  out.runs.resize(static_cast<std::size_t>(n_T) * n_seeds);

  auto work = [&](int flat) {
    const int ti = flat / n_seeds;
    const int si = flat % n_seeds;
    out.runs[flat] = rate_run(cfg, cfg.T_grid[ti], cfg.seeds[si]);
  };
  const int total = n_T * n_seeds;
  if (cfg.jobs <= 1) {
    for (int i = 0; i < total; ++i) work(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    const int workers = std::min(cfg.jobs, total);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int i = next.fetch_add(1); i < total; i = next.fetch_add(1)) work(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  for (int ti = 0; ti < n_T; ++ti) {
    std::vector<double> errs;
    double bound = std::sqrt(std::log(static_cast<double>(cfg.T_grid[ti])) /
                             cfg.T_grid[ti]);
    for (int si = 0; si < n_seeds; ++si) {
      const RateRun& r = out.runs[ti * n_seeds + si];
      if (r.diverged) {
        ++out.diverged_runs;
        continue;
      }
      errs.push_back(r.max_A_error);
    }
    out.median_error.push_back(median(errs));
    out.bound.push_back(bound);
    out.median_ratio.push_back(out.median_error.back() / bound);
  }
  return out;
}

std::string rate_experiment_csv(const RateExperiment& experiment) {
  std::string csv =
      "T,seed,mode,err_Ac,err_Aa,err_Cc,err_Ca,err_Sc,err_Sa,err_Sm,bound,"
      "ratio\n";
  for (const RateRun& r : experiment.runs) {
    if (r.diverged) continue;
    const int m = static_cast<int>(std::max(r.err_A_c.size(), r.err_A_a.size()));
    for (int mode = 0; mode < m; ++mode) {
      std::string row = std::to_string(r.T) + "," + std::to_string(r.seed) +
                        "," + std::to_string(mode + 1) + ",";
      const bool has_c = mode < static_cast<int>(r.err_A_c.size());
      const bool has_a = mode < static_cast<int>(r.err_A_a.size());
      if (has_c) append_field(row, r.err_A_c[mode]);
      row += ",";
      if (has_a) append_field(row, r.err_A_a[mode]);
      row += ",";
      if (has_c) append_field(row, r.err_C_c[mode]);
      row += ",";
      if (has_a) append_field(row, r.err_C_a[mode]);
      row += ",";
      if (has_c) append_field(row, r.err_Sigma_c[mode]);
      row += ",";
      if (has_a) append_field(row, r.err_Sigma_a[mode]);
      row += ",";
      append_field(row, r.err_Sigma_m);
      row += ",";
      append_field(row, r.bound);
      row += ",";
      append_field(row, r.ratio);
      row += "\n";
      csv += row;
    }
  }
  return csv;
}

}  // namespace ncrsm
