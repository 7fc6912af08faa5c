#include "cli_main.hpp"

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ncrsm/bench.hpp"
#include "ncrsm/em.hpp"
#include "ncrsm/estep.hpp"
#include "ncrsm/io.hpp"
#include "ncrsm/metrics.hpp"
#include "ncrsm/model.hpp"
#include "ncrsm/simulator.hpp"

namespace ncrsm::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Overrides `seed` from the NCRSM_SEED environment variable when it is set.
void apply_seed_env(std::uint64_t* seed) {
  const char* env = std::getenv("NCRSM_SEED");
  if (env == nullptr || *env == '\0') return;
  std::uint64_t value = 0;
  const char* end = env + std::strlen(env);
  const auto res = std::from_chars(env, end, value);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ValidationError("NCRSM_SEED must be an unsigned integer, got '" +
                          std::string(env) + "'");
  }
  *seed = value;
}

Dims parse_dims(const std::string& text) {
  std::vector<int> values;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    int v = 0;
    const auto res = std::from_chars(text.data() + pos, text.data() + comma, v);
    if (res.ec != std::errc() || res.ptr != text.data() + comma) {
      throw ValidationError("--dims expects five comma-separated integers "
                            "n_y,n_xc,n_xa,m_c,m_a, got '" + text + "'");
    }
    values.push_back(v);
    pos = comma + 1;
    if (comma == text.size()) break;
  }
  if (values.size() != 5) {
    throw ValidationError("--dims expects five comma-separated integers "
                          "n_y,n_xc,n_xa,m_c,m_a, got '" + text + "'");
  }
  const Dims d{values[0], values[1], values[2], values[3], values[4]};
  if (!d.valid()) {
    throw ValidationError("--dims entries must all be >= 1, got '" + text +
                          "'");
  }
  return d;
}

Vector to_boundary(const std::vector<double>& values, int dim,
                   const char* flag) {
  if (values.empty()) return Vector::Zero(dim);
  if (static_cast<int>(values.size()) != dim) {
    throw ValidationError(std::string(flag) + " expects " +
                          std::to_string(dim) + " entries, got " +
                          std::to_string(values.size()));
  }
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = values[i];
  return v;
}

Json echo_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  return Json::parse(in);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw ValidationError("failed writing " + path);
}

int do_simulate(const std::string& config_path, const std::string& out_prefix,
                const std::string& cmdline) {
  const auto start = Clock::now();
  SimulateConfig cfg = load_simulate_config(config_path);
  apply_seed_env(&cfg.seed);

  const std::string csv_path = out_prefix + ".csv";
  const std::string truth_path = out_prefix + ".truth.json";
  const std::string manifest_path = out_prefix + ".manifest.json";

  const SwitchingSequence seq = draw_switching(cfg.params, cfg.T, cfg.seed);
  const Trajectory traj =
      simulate(cfg.params, seq, cfg.x_c0, cfg.x_aT1, cfg.seed);
  write_trajectory(csv_path, traj, manifest_path);

  RunManifest m;
  m.tool_version = kToolVersion;
  m.command = cmdline;
  m.config_echo = echo_file(config_path);
  m.seeds = {cfg.seed};
  m.input_hashes[config_path] = file_hash(config_path);
  m.stop_reason = "ok";
  m.artifacts = {csv_path};
  if (cfg.write_truth) {
    TruthFile tf;
    tf.params = cfg.params;
    tf.x_c0 = cfg.x_c0;
    tf.x_aT1 = cfg.x_aT1;
    tf.seed = cfg.seed;
    tf.manifest_ref = manifest_path;
    save_truth(truth_path, tf);
    m.artifacts.push_back(truth_path);
  }
  m.wall_clock_seconds = seconds_since(start);
  save_manifest(manifest_path, m);
  std::cerr << "simulate: T=" << cfg.T << " seed=" << cfg.seed << " -> "
            << csv_path << '\n';
  return 0;
}

int do_identify(const std::string& data_path, const std::string& dims_text,
                const std::string& config_path, const std::string& out_prefix,
                int jobs, bool verbose, const std::string& cmdline) {
  const auto start = Clock::now();
  const Dims dims = parse_dims(dims_text);
  const Trajectory traj = read_trajectory(data_path);
  if (static_cast<int>(traj.y.rows()) != dims.n_y) {
    throw ValidationError("--dims declares n_y=" + std::to_string(dims.n_y) +
                          " but " + data_path + " has " +
                          std::to_string(traj.y.rows()) + " output columns");
  }
  IdentifyConfig cfg = load_identify_config(config_path, dims);
  apply_seed_env(&cfg.em.seed);
  cfg.em.jobs = jobs;
  if (verbose) cfg.em.progress = &std::cerr;
  if (cfg.x_c0.size() == 0) cfg.x_c0 = Vector::Zero(dims.n_xc);
  if (cfg.x_aT1.size() == 0) cfg.x_aT1 = Vector::Zero(dims.n_xa);

  const EmReport rep = ncrsm::run(traj.y, cfg.x_c0, cfg.x_aT1, dims, cfg.em);

  const std::string params_path = out_prefix + ".params.json";
  const std::string report_path = out_prefix + ".report.json";
  const std::string manifest_path = out_prefix + ".manifest.json";
  save_params(params_path, rep.final_params, manifest_path);
  save_em_report(report_path, rep, manifest_path);

  RunManifest m;
  m.tool_version = kToolVersion;
  m.command = cmdline;
  m.config_echo = echo_file(config_path);
  m.seeds = {cfg.em.seed};
  m.input_hashes[data_path] = file_hash(data_path);
  m.input_hashes[config_path] = file_hash(config_path);
  m.stop_reason = to_string(rep.stop_reason);
  m.artifacts = {params_path, report_path};
  m.wall_clock_seconds = seconds_since(start);
  save_manifest(manifest_path, m);
  std::cerr << "identify: stop=" << to_string(rep.stop_reason)
            << " iters=" << rep.iterations
            << " loglik=" << g17(rep.loglik_trace.back()) << " -> "
            << params_path << '\n';
  return 0;
}

int do_evaluate(const std::string& truth_path, const std::string& estimate_path,
                const std::string& data_path, const std::string& out_csv,
                const std::string& cmdline) {
  const auto start = Clock::now();
  const TruthFile truth = load_truth(truth_path);
  const ParamsFile est = load_params(estimate_path);
  const Trajectory traj = read_trajectory(data_path);

  const Dims d = truth.params.dims();
  if (!(d == est.params.dims())) {
    throw ValidationError("truth and estimate parameter shapes disagree");
  }
  if (static_cast<int>(traj.y.rows()) != d.n_y) {
    throw ValidationError("data has " + std::to_string(traj.y.rows()) +
                          " output columns, parameters expect " +
                          std::to_string(d.n_y));
  }

  std::vector<std::pair<std::string, double>> rows;
  const ParamErrorTable tab = param_error(truth.params, est.params);
  for (int j = 0; j < d.m_c; ++j) {
    rows.emplace_back("err_A_c_" + std::to_string(j + 1), tab.err_A_c[j]);
  }
  for (int l = 0; l < d.m_a; ++l) {
    rows.emplace_back("err_A_a_" + std::to_string(l + 1), tab.err_A_a[l]);
  }
  for (int j = 0; j < d.m_c; ++j) {
    rows.emplace_back("err_C_c_" + std::to_string(j + 1), tab.err_C_c[j]);
  }
  for (int l = 0; l < d.m_a; ++l) {
    rows.emplace_back("err_C_a_" + std::to_string(l + 1), tab.err_C_a[l]);
  }
  for (int j = 0; j < d.m_c; ++j) {
    rows.emplace_back("err_Sigma_c_" + std::to_string(j + 1),
                      tab.err_Sigma_c[j]);
  }
  for (int l = 0; l < d.m_a; ++l) {
    rows.emplace_back("err_Sigma_a_" + std::to_string(l + 1),
                      tab.err_Sigma_a[l]);
  }
  rows.emplace_back("err_Sigma_m", tab.err_Sigma_m);
  rows.emplace_back("err_pi_c", tab.err_pi_c);
  rows.emplace_back("err_pi_a", tab.err_pi_a);
  rows.emplace_back("err_total", tab.total);

  if (traj.has_true_seq() || traj.has_true_states()) {
    if (traj.has_true_states() &&
        (static_cast<int>(traj.x_c_true.rows()) != d.n_xc ||
         static_cast<int>(traj.x_a_true.rows()) != d.n_xa)) {
      throw ValidationError(
          "data truth columns disagree with the parameter state dimensions");
    }
    const SmoothResult sr = smooth_fixed_params(est.params, traj.y,
                                                truth.x_c0, truth.x_aT1);
    if (traj.has_true_seq()) {
      rows.emplace_back("match_rate_s_c",
                        match_rate(traj.seq_true.s_c,
                                   sr.assignment.s_c_hat, d.m_c));
      rows.emplace_back("match_rate_s_a",
                        match_rate(traj.seq_true.s_a,
                                   sr.assignment.s_a_hat, d.m_a));
    }
    if (traj.has_true_states()) {
      rows.emplace_back("delta_c",
                        rel_state_error(traj.x_c_true, sr.filter.x_c_hat));
      rows.emplace_back("delta_a",
                        rel_state_error(traj.x_a_true, sr.filter.x_a_hat));
    }
  }

  const std::string manifest_path = out_csv + ".manifest.json";
  std::string text = "# manifest=" + manifest_path + "\nmetric,value\n";
  for (const auto& [name, value] : rows) {
    text += name + "," + g17(value) + "\n";
  }
  write_text(out_csv, text);

  RunManifest m;
  m.tool_version = kToolVersion;
  m.command = cmdline;
  m.input_hashes[truth_path] = file_hash(truth_path);
  m.input_hashes[estimate_path] = file_hash(estimate_path);
  m.input_hashes[data_path] = file_hash(data_path);
  m.stop_reason = "ok";
  m.artifacts = {out_csv};
  m.wall_clock_seconds = seconds_since(start);
  save_manifest(manifest_path, m);
  std::cerr << "evaluate: " << rows.size() << " metrics -> " << out_csv
            << '\n';
  return 0;
}

int do_smooth(const std::string& data_path, const std::string& model_path,
              const std::string& out_csv, const std::vector<double>& xc0,
              const std::vector<double>& xaT1, const std::string& cmdline) {
  const auto start = Clock::now();
  const ParamsFile model = load_params(model_path);
  const Trajectory traj = read_trajectory(data_path);
  const Dims d = model.params.dims();
  if (static_cast<int>(traj.y.rows()) != d.n_y) {
    throw ValidationError("data has " + std::to_string(traj.y.rows()) +
                          " output columns, model expects " +
                          std::to_string(d.n_y));
  }
  const Vector x_c0 = to_boundary(xc0, d.n_xc, "--xc0");
  const Vector x_aT1 = to_boundary(xaT1, d.n_xa, "--xaT1");

  const SmoothResult sr =
      smooth_fixed_params(model.params, traj.y, x_c0, x_aT1);
  const int T = traj.T();
  Matrix y_hat(d.n_y, T);
  for (int t = 0; t < T; ++t) {
    y_hat.col(t) =
        model.params.C_c[sr.assignment.s_c_hat[t]] * sr.filter.x_c_hat.col(t) +
        model.params.C_a[sr.assignment.s_a_hat[t]] * sr.filter.x_a_hat.col(t);
  }

  const std::string manifest_path = out_csv + ".manifest.json";
  std::string text = "# manifest=" + manifest_path + "\nt";
  for (int i = 1; i <= d.n_y; ++i) text += ",yhat_" + std::to_string(i);
  text += "\n";
  for (int t = 0; t < T; ++t) {
    text += std::to_string(t + 1);
    for (int i = 0; i < d.n_y; ++i) text += "," + g17(y_hat(i, t));
    text += "\n";
  }
  write_text(out_csv, text);

  RunManifest m;
  m.tool_version = kToolVersion;
  m.command = cmdline;
  m.input_hashes[data_path] = file_hash(data_path);
  m.input_hashes[model_path] = file_hash(model_path);
  m.stop_reason = sr.converged ? "assignment fixed point" : "max passes";
  m.artifacts = {out_csv};
  m.wall_clock_seconds = seconds_since(start);
  save_manifest(manifest_path, m);
  std::cerr << "smooth: passes=" << sr.passes << " converged="
            << (sr.converged ? "yes" : "no") << " -> " << out_csv << '\n';
  return 0;
}

int do_benchmark(const std::string& suite, int jobs) {
  std::vector<std::string> names;
  if (suite != "all") {
    std::size_t pos = 0;
    while (pos <= suite.size()) {
      const std::size_t comma = std::min(suite.find(',', pos), suite.size());
      names.push_back(suite.substr(pos, comma - pos));
      pos = comma + 1;
      if (comma == suite.size()) break;
    }
    const std::vector<std::string> known = bench::criterion_names();
    for (const std::string& n : names) {
      if (std::find(known.begin(), known.end(), n) == known.end()) {
        throw ValidationError("unknown criterion '" + n +
                              "'; use A1..A10 or 'all'");
      }
    }
  }
  const bench::SuiteResult res = bench::run_suite(names, jobs, std::cout);
  return res.gate_passed ? 0 : 1;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  std::string cmdline;
  for (int i = 0; i < argc; ++i) {
    if (i > 0) cmdline += ' ';
    cmdline += argv[i];
  }

  CLI::App app{"identification toolkit for switching state-space models with "
               "one forward and one backward propagating subsystem"};
  app.require_subcommand(1);
  int rc = 0;

  std::string sim_config, sim_out;
  auto* sim = app.add_subcommand(
      "simulate", "draw switching sequences and a trajectory from a config");
  sim->add_option("--config", sim_config, "simulation config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  sim->add_option("--out", sim_out, "output path prefix")->required();

  std::string id_data, id_dims, id_config, id_out;
  int id_jobs = 1;
  bool id_verbose = false;
  auto* ident = app.add_subcommand(
      "identify", "estimate parameters, modes and states from a trajectory");
  ident->add_option("--data", id_data, "trajectory CSV")
      ->required()
      ->check(CLI::ExistingFile);
  ident->add_option("--dims", id_dims, "n_y,n_xc,n_xa,m_c,m_a")->required();
  ident->add_option("--config", id_config, "identification config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  ident->add_option("--out", id_out, "output path prefix")->required();
  ident->add_option("--jobs", id_jobs, "concurrent restarts")
      ->check(CLI::PositiveNumber);
  ident->add_flag("--verbose", id_verbose,
                  "per-iteration progress on standard error");

  std::string ev_truth, ev_estimate, ev_data, ev_out = "metrics.csv";
  auto* ev = app.add_subcommand(
      "evaluate", "score an estimate against ground truth");
  ev->add_option("--truth", ev_truth, "truth JSON written by simulate")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--estimate", ev_estimate, "estimated parameter JSON")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--data", ev_data, "trajectory CSV with truth columns")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--out", ev_out, "metric table CSV (default metrics.csv)");

  std::string sm_data, sm_model, sm_out;
  std::vector<double> sm_xc0, sm_xaT1;
  auto* sm = app.add_subcommand(
      "smooth", "mode assignment and state filtering under fixed parameters");
  sm->add_option("--data", sm_data, "trajectory CSV")
      ->required()
      ->check(CLI::ExistingFile);
  sm->add_option("--model", sm_model, "parameter JSON")
      ->required()
      ->check(CLI::ExistingFile);
  sm->add_option("--out", sm_out, "output CSV of fitted outputs")->required();
  sm->add_option("--xc0", sm_xc0, "forward boundary state (default zeros)")
      ->delimiter(',');
  sm->add_option("--xaT1", sm_xaT1, "backward boundary state (default zeros)")
      ->delimiter(',');

  std::string bm_suite = "all";
  int bm_jobs = 1;
  auto* bm = app.add_subcommand("benchmark",
                                "run the acceptance criteria suite");
  bm->add_option("--suite", bm_suite, "'all' or comma list of A1..A10");
  bm->add_option("--jobs", bm_jobs, "worker threads")
      ->check(CLI::PositiveNumber);

  sim->callback([&] { rc = do_simulate(sim_config, sim_out, cmdline); });
  ident->callback([&] {
    rc = do_identify(id_data, id_dims, id_config, id_out, id_jobs, id_verbose,
                     cmdline);
  });
  ev->callback(
      [&] { rc = do_evaluate(ev_truth, ev_estimate, ev_data, ev_out, cmdline); });
  sm->callback([&] {
    rc = do_smooth(sm_data, sm_model, sm_out, sm_xc0, sm_xaT1, cmdline);
  });
  bm->callback([&] { rc = do_benchmark(bm_suite, bm_jobs); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return rc;
}

}  // namespace ncrsm::cli
