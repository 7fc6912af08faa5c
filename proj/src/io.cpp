#include "ncrsm/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ncrsm {

const char* const kToolVersion = "0.1.0";

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open file for writing: " + path);
  out << content;
  if (!out) throw ValidationError("write failed: " + path);
}

void format_double(std::string& out, double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  out += buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

[[noreturn]] void parse_fail(const std::string& path, int line, int column,
                             const std::string& what) {
  std::ostringstream ss;
  ss << path << ":" << line << ":" << column << ": " << what;
  throw ValidationError(ss.str());
}

double parse_double(const std::string& field, const std::string& path,
                    int line, int column) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end || field.empty()) {
    parse_fail(path, line, column, "not a number: '" + field + "'");
  }
  if (!std::isfinite(value)) {
    parse_fail(path, line, column, "non-finite cell");
  }
  return value;
}

long parse_int(const std::string& field, const std::string& path, int line,
               int column) {
  long value = 0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end || field.empty()) {
    parse_fail(path, line, column, "not an integer: '" + field + "'");
  }
  return value;
}

// Counts consecutive header names "<prefix>1", "<prefix>2", ... starting at
// `pos`; advances pos past them.
int count_indexed(const std::vector<std::string>& header, std::size_t& pos,
                  const std::string& prefix) {
  int n = 0;
  while (pos < header.size() && header[pos] == prefix + std::to_string(n + 1)) {
    ++n;
    ++pos;
  }
  return n;
}

void check_keys(const Json& j, const std::vector<std::string>& allowed,
                const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const auto& key : allowed) {
      if (item.key() == key) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ValidationError(where + ": unknown key '" + item.key() + "'");
  }
}

double json_number(const Json& j, const std::string& where) {
  if (!j.is_number()) throw ValidationError(where + ": expected a number");
  return j.get<double>();
}

Json vector_to_json(const Vector& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw ValidationError(what + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] =
        json_number(j[i], what + "[" + std::to_string(i) + "]");
  }
  return v;
}

Json matrix_list_to_json(const std::vector<Matrix>& list) {
  Json arr = Json::array();
  for (const Matrix& m : list) arr.push_back(matrix_to_json(m));
  return arr;
}

std::vector<Matrix> matrix_list_from_json(const Json& j,
                                          const std::string& what) {
  if (!j.is_array()) throw ValidationError(what + ": expected an array");
  std::vector<Matrix> list;
  list.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    list.push_back(
        matrix_from_json(j[i], what + "[" + std::to_string(i + 1) + "]"));
  }
  return list;
}

Json dims_to_json(const Dims& d) {
  Json j;
  j["n_y"] = d.n_y;
  j["n_xc"] = d.n_xc;
  j["n_xa"] = d.n_xa;
  j["m_c"] = d.m_c;
  j["m_a"] = d.m_a;
  return j;
}

Dims dims_from_json(const Json& j, const std::string& where) {
  check_keys(j, {"n_y", "n_xc", "n_xa", "m_c", "m_a"}, where);
  Dims d;
  d.n_y = j.at("n_y").get<int>();
  d.n_xc = j.at("n_xc").get<int>();
  d.n_xa = j.at("n_xa").get<int>();
  d.m_c = j.at("m_c").get<int>();
  d.m_a = j.at("m_a").get<int>();
  if (!d.valid()) throw ValidationError(where + ": dimensions must be positive");
  return d;
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace

std::string file_hash(const std::string& path) {
  const std::string bytes = read_file(path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

void write_trajectory(const std::string& path, const Trajectory& traj,
                      const std::string& manifest_ref) {
  const int T = traj.T();
  const int n_y = static_cast<int>(traj.y.rows());
  const bool truth = traj.has_true_states() && traj.has_true_seq();

  std::string out;
  out.reserve(static_cast<std::size_t>(T) * 24 * (truth ? 6 : 2) + 256);
  if (!manifest_ref.empty()) out += "# manifest=" + manifest_ref + "\n";
  out += "t";
  for (int i = 1; i <= n_y; ++i) out += ",y_" + std::to_string(i);
  if (truth) {
    for (int i = 1; i <= traj.x_c_true.rows(); ++i) {
      out += ",xc_" + std::to_string(i);
    }
    for (int i = 1; i <= traj.x_a_true.rows(); ++i) {
      out += ",xa_" + std::to_string(i);
    }
    out += ",sc,sa";
  }
  out += "\n";

  for (int t = 0; t < T; ++t) {
    out += std::to_string(t + 1);
    for (int i = 0; i < n_y; ++i) {
      out += ",";
      format_double(out, traj.y(i, t));
    }
    if (truth) {
      for (Eigen::Index i = 0; i < traj.x_c_true.rows(); ++i) {
        out += ",";
        format_double(out, traj.x_c_true(i, t));
      }
      for (Eigen::Index i = 0; i < traj.x_a_true.rows(); ++i) {
        out += ",";
        format_double(out, traj.x_a_true(i, t));
      }
      out += "," + std::to_string(traj.seq_true.s_c[t] + 1);
      out += "," + std::to_string(traj.seq_true.s_a[t] + 1);
    }
    out += "\n";
  }
  write_file(path, out);
}

Trajectory read_trajectory(const std::string& path) {
  const std::string bytes = read_file(path);

  std::vector<std::pair<int, std::string>> lines;  // (line number, text)
  {
    int lineno = 0;
    std::size_t start = 0;
    while (start <= bytes.size()) {
      std::size_t nl = bytes.find('\n', start);
      if (nl == std::string::npos) nl = bytes.size();
      ++lineno;
      std::string text = bytes.substr(start, nl - start);
      if (!text.empty() && text.back() == '\r') text.pop_back();
      if (!text.empty() && text[0] != '#') lines.emplace_back(lineno, text);
      start = nl + 1;
    }
    while (!lines.empty() && lines.back().second.empty()) lines.pop_back();
  }
  if (lines.empty()) parse_fail(path, 1, 1, "empty file");

  const auto header = split_csv_line(lines[0].second);
  std::size_t pos = 0;
  if (header.empty() || header[0] != "t") {
    parse_fail(path, lines[0].first, 1, "header must start with 't'");
  }
  ++pos;
  const int n_y = count_indexed(header, pos, "y_");
  if (n_y == 0) {
    parse_fail(path, lines[0].first, 2, "header needs y_1..y_<ny> columns");
  }
  const int n_xc = count_indexed(header, pos, "xc_");
  const int n_xa = count_indexed(header, pos, "xa_");
  bool truth = false;
  if (pos < header.size()) {
    if (n_xc == 0 || n_xa == 0 || header.size() != pos + 2 ||
        header[pos] != "sc" || header[pos + 1] != "sa") {
      parse_fail(path, lines[0].first, static_cast<int>(pos + 1),
                 "unexpected header column '" +
                     (pos < header.size() ? header[pos] : "") + "'");
    }
    truth = true;
    pos += 2;
  } else if (n_xc != 0 || n_xa != 0) {
    parse_fail(path, lines[0].first, static_cast<int>(pos + 1),
               "truth columns must end with sc,sa");
  }
  const std::size_t n_fields = pos;

  const int T = static_cast<int>(lines.size()) - 1;
  if (T < 1) parse_fail(path, lines[0].first, 1, "no data rows");

  Trajectory traj;
  traj.y.resize(n_y, T);
  if (truth) {
    traj.x_c_true.resize(n_xc, T);
    traj.x_a_true.resize(n_xa, T);
    traj.seq_true.s_c.resize(T);
    traj.seq_true.s_a.resize(T);
  }

  for (int t = 0; t < T; ++t) {
    const int lineno = lines[t + 1].first;
    const auto fields = split_csv_line(lines[t + 1].second);
    if (fields.size() != n_fields) {
      parse_fail(path, lineno, static_cast<int>(fields.size()),
                 "expected " + std::to_string(n_fields) + " fields, got " +
                     std::to_string(fields.size()));
    }
    int col = 0;
    const long t_val = parse_int(fields[col], path, lineno, col + 1);
    if (t_val != t + 1) {
      parse_fail(path, lineno, col + 1,
                 "time index must be " + std::to_string(t + 1));
    }
    ++col;
    for (int i = 0; i < n_y; ++i, ++col) {
      traj.y(i, t) = parse_double(fields[col], path, lineno, col + 1);
    }
    if (truth) {
      for (int i = 0; i < n_xc; ++i, ++col) {
        traj.x_c_true(i, t) = parse_double(fields[col], path, lineno, col + 1);
      }
      for (int i = 0; i < n_xa; ++i, ++col) {
        traj.x_a_true(i, t) = parse_double(fields[col], path, lineno, col + 1);
      }
      const long sc = parse_int(fields[col], path, lineno, col + 1);
      if (sc < 1) parse_fail(path, lineno, col + 1, "mode index must be >= 1");
      traj.seq_true.s_c[t] = static_cast<int>(sc - 1);
      ++col;
      const long sa = parse_int(fields[col], path, lineno, col + 1);
      if (sa < 1) parse_fail(path, lineno, col + 1, "mode index must be >= 1");
      traj.seq_true.s_a[t] = static_cast<int>(sa - 1);
      ++col;
    }
  }
  return traj;
}

Json matrix_to_json(const Matrix& m) {
  Json data = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    data.push_back(std::move(row));
  }
  Json j;
  j["rows"] = static_cast<int>(m.rows());
  j["cols"] = static_cast<int>(m.cols());
  j["data"] = std::move(data);
  return j;
}

Matrix matrix_from_json(const Json& j, const std::string& what) {
  check_keys(j, {"rows", "cols", "data"}, what);
  if (!j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
    throw ValidationError(what + ": needs rows, cols, data");
  }
  const int rows = j.at("rows").get<int>();
  const int cols = j.at("cols").get<int>();
  if (rows < 0 || cols < 0) throw ValidationError(what + ": negative shape");
  const Json& data = j.at("data");
  if (!data.is_array() || static_cast<int>(data.size()) != rows) {
    throw ValidationError(what + ": data must have 'rows' rows");
  }
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const Json& row = data[r];
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      throw ValidationError(what + ": row " + std::to_string(r + 1) +
                            " must have 'cols' entries");
    }
    for (int c = 0; c < cols; ++c) {
      m(r, c) = json_number(row[c], what + " entry");
    }
  }
  return m;
}

Json params_to_json(const ModelParams& params,
                    const std::string& manifest_ref) {
  Json j;
  j["dims"] = dims_to_json(params.dims());
  j["A_c"] = matrix_list_to_json(params.A_c);
  j["A_a"] = matrix_list_to_json(params.A_a);
  j["C_c"] = matrix_list_to_json(params.C_c);
  j["C_a"] = matrix_list_to_json(params.C_a);
  j["Sigma_c"] = matrix_list_to_json(params.Sigma_c);
  j["Sigma_a"] = matrix_list_to_json(params.Sigma_a);
  j["Sigma_m"] = matrix_to_json(params.Sigma_m);
  j["pi_c"] = vector_to_json(params.pi_c);
  j["pi_a"] = vector_to_json(params.pi_a);
  j["manifest"] = manifest_ref;
  return j;
}

namespace {

ModelParams params_from_json_impl(const Json& j, std::string* manifest_ref,
                                  const std::string& where) {
  check_keys(j,
             {"dims", "A_c", "A_a", "C_c", "C_a", "Sigma_c", "Sigma_a",
              "Sigma_m", "pi_c", "pi_a", "manifest"},
             where);
  const Dims d = dims_from_json(j.at("dims"), where + ".dims");
  ModelParams p;
  p.A_c = matrix_list_from_json(j.at("A_c"), where + ".A_c");
  p.A_a = matrix_list_from_json(j.at("A_a"), where + ".A_a");
  p.C_c = matrix_list_from_json(j.at("C_c"), where + ".C_c");
  p.C_a = matrix_list_from_json(j.at("C_a"), where + ".C_a");
  p.Sigma_c = matrix_list_from_json(j.at("Sigma_c"), where + ".Sigma_c");
  p.Sigma_a = matrix_list_from_json(j.at("Sigma_a"), where + ".Sigma_a");
  p.Sigma_m = matrix_from_json(j.at("Sigma_m"), where + ".Sigma_m");
  p.pi_c = vector_from_json(j.at("pi_c"), where + ".pi_c");
  p.pi_a = vector_from_json(j.at("pi_a"), where + ".pi_a");
  if (manifest_ref != nullptr) {
    *manifest_ref =
        j.contains("manifest") ? j.at("manifest").get<std::string>() : "";
  }
  // Shape checks only; numeric invariants are the caller's business (truth
  // files for noiseless experiments carry zero covariances on purpose).
  auto check_list = [&](const std::vector<Matrix>& list, int count, int rows,
                        int cols, const char* name) {
    if (static_cast<int>(list.size()) != count) {
      throw ValidationError(where + "." + name + ": expected " +
                            std::to_string(count) + " matrices");
    }
    for (const Matrix& m : list) {
      if (m.rows() != rows || m.cols() != cols) {
        throw ValidationError(where + "." + name + ": expected shape " +
                              std::to_string(rows) + "x" +
                              std::to_string(cols));
      }
    }
  };
  check_list(p.A_c, d.m_c, d.n_xc, d.n_xc, "A_c");
  check_list(p.A_a, d.m_a, d.n_xa, d.n_xa, "A_a");
  check_list(p.C_c, d.m_c, d.n_y, d.n_xc, "C_c");
  check_list(p.C_a, d.m_a, d.n_y, d.n_xa, "C_a");
  check_list(p.Sigma_c, d.m_c, d.n_xc, d.n_xc, "Sigma_c");
  check_list(p.Sigma_a, d.m_a, d.n_xa, d.n_xa, "Sigma_a");
  if (p.Sigma_m.rows() != d.n_y || p.Sigma_m.cols() != d.n_y) {
    throw ValidationError(where + ".Sigma_m: expected shape " +
                          std::to_string(d.n_y) + "x" + std::to_string(d.n_y));
  }
  if (p.pi_c.size() != d.m_c || p.pi_a.size() != d.m_a) {
    throw ValidationError(where + ": pi sizes disagree with dims");
  }
  return p;
}

}  // namespace

ModelParams params_from_json(const Json& j) {
  return params_from_json_impl(j, nullptr, "params");
}

void save_params(const std::string& path, const ModelParams& params,
                 const std::string& manifest_ref) {
  write_file(path, dump_json(params_to_json(params, manifest_ref)));
}

ParamsFile load_params(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
  ParamsFile out;
  out.params = params_from_json_impl(j, &out.manifest_ref, path);
  return out;
}

void save_truth(const std::string& path, const TruthFile& truth) {
  Json j;
  j["params"] = params_to_json(truth.params, "");
  j["params"].erase("manifest");
  j["x_c0"] = vector_to_json(truth.x_c0);
  j["x_aT1"] = vector_to_json(truth.x_aT1);
  j["seed"] = truth.seed;
  j["manifest"] = truth.manifest_ref;
  write_file(path, dump_json(j));
}

TruthFile load_truth(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
  check_keys(j, {"params", "x_c0", "x_aT1", "seed", "manifest"}, path);
  TruthFile t;
  t.params = params_from_json_impl(j.at("params"), nullptr, path + ".params");
  t.x_c0 = vector_from_json(j.at("x_c0"), path + ".x_c0");
  t.x_aT1 = vector_from_json(j.at("x_aT1"), path + ".x_aT1");
  t.seed = j.at("seed").get<std::uint64_t>();
  t.manifest_ref =
      j.contains("manifest") ? j.at("manifest").get<std::string>() : "";
  const Dims d = t.params.dims();
  if (t.x_c0.size() != d.n_xc || t.x_aT1.size() != d.n_xa) {
    throw ValidationError(path + ": boundary state sizes disagree with dims");
  }
  return t;
}

Json em_report_to_json(const EmReport& report,
                       const std::string& manifest_ref) {
  Json j;
  j["loglik_trace"] = report.loglik_trace;
  Json q = Json::array();
  for (const QValue& v : report.q_trace) {
    Json e;
    e["q_total"] = v.q_total;
    e["q1"] = v.q1;
    e["q2"] = v.q2;
    e["q3"] = v.q3;
    q.push_back(std::move(e));
  }
  j["q_trace"] = std::move(q);
  j["stop_reason"] = to_string(report.stop_reason);
  j["iterations"] = report.iterations;
  j["restart_index_chosen"] = report.restart_index_chosen;
  j["restarts_failed"] = report.restarts_failed;
  j["diagnostics"] = report.diagnostics;
  Json sc = Json::array(), sa = Json::array();
  for (int v : report.final_assignment.s_c_hat) sc.push_back(v + 1);
  for (int v : report.final_assignment.s_a_hat) sa.push_back(v + 1);
  j["s_c_hat"] = std::move(sc);
  j["s_a_hat"] = std::move(sa);
  j["manifest"] = manifest_ref;
  return j;
}

void save_em_report(const std::string& path, const EmReport& report,
                    const std::string& manifest_ref) {
  write_file(path, dump_json(em_report_to_json(report, manifest_ref)));
}

SimulateConfig load_simulate_config(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
  check_keys(j, {"seed", "T", "params", "x_c0", "x_aT1", "write_truth"}, path);
  SimulateConfig cfg;
  if (!j.contains("T") || !j.contains("params")) {
    throw ValidationError(path + ": needs keys 'T' and 'params'");
  }
  cfg.T = j.at("T").get<int>();
  if (cfg.T < 1) throw ValidationError(path + ": T must be >= 1");
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.params = params_from_json_impl(j.at("params"), nullptr, path + ".params");
  const Dims d = cfg.params.dims();
  cfg.x_c0 = j.contains("x_c0")
                 ? vector_from_json(j.at("x_c0"), path + ".x_c0")
                 : Vector(Vector::Zero(d.n_xc));
  cfg.x_aT1 = j.contains("x_aT1")
                  ? vector_from_json(j.at("x_aT1"), path + ".x_aT1")
                  : Vector(Vector::Zero(d.n_xa));
  if (cfg.x_c0.size() != d.n_xc || cfg.x_aT1.size() != d.n_xa) {
    throw ValidationError(path + ": boundary state sizes disagree with dims");
  }
  if (j.contains("write_truth")) cfg.write_truth = j.at("write_truth").get<bool>();
  return cfg;
}

IdentifyConfig load_identify_config(const std::string& path,
                                    const Dims& dims) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
  check_keys(j,
             {"seed", "max_iters", "tol_loglik", "restarts", "init_scheme",
              "inner_sweeps", "init_prior_scale", "boundary_exact_prior",
              "ridge", "sigma_floor", "mode_prob_floor", "monotonicity_tol",
              "jobs", "user_init", "user_init_jitter", "x_c0", "x_aT1"},
             path);
  IdentifyConfig cfg;
  EmConfig& em = cfg.em;
  if (j.contains("seed")) em.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("max_iters")) em.max_iters = j.at("max_iters").get<int>();
  if (j.contains("tol_loglik")) {
    em.tol_loglik = json_number(j.at("tol_loglik"), path + ".tol_loglik");
  }
  if (j.contains("restarts")) em.restarts = j.at("restarts").get<int>();
  if (j.contains("init_scheme")) {
    em.init_scheme =
        init_scheme_from_string(j.at("init_scheme").get<std::string>());
  }
  if (j.contains("inner_sweeps")) {
    em.inner_sweeps = j.at("inner_sweeps").get<int>();
  }
  if (j.contains("init_prior_scale")) {
    em.init_prior_scale =
        json_number(j.at("init_prior_scale"), path + ".init_prior_scale");
  }
  if (j.contains("boundary_exact_prior")) {
    em.boundary_exact_prior = j.at("boundary_exact_prior").get<bool>();
  }
  if (j.contains("ridge")) em.ridge = json_number(j.at("ridge"), path + ".ridge");
  if (j.contains("sigma_floor")) {
    em.sigma_floor = json_number(j.at("sigma_floor"), path + ".sigma_floor");
  }
  if (j.contains("mode_prob_floor")) {
    em.mode_prob_floor =
        json_number(j.at("mode_prob_floor"), path + ".mode_prob_floor");
  }
  if (j.contains("monotonicity_tol")) {
    em.monotonicity_tol =
        json_number(j.at("monotonicity_tol"), path + ".monotonicity_tol");
  }
  if (j.contains("jobs")) em.jobs = j.at("jobs").get<int>();
  if (j.contains("user_init")) {
    em.user_init =
        params_from_json_impl(j.at("user_init"), nullptr, path + ".user_init");
    if (!(em.user_init.dims() == dims)) {
      throw ValidationError(path + ".user_init: dims disagree with --dims");
    }
  }
  if (j.contains("user_init_jitter")) {
    em.user_init_jitter =
        json_number(j.at("user_init_jitter"), path + ".user_init_jitter");
  }
  cfg.x_c0 = j.contains("x_c0")
                 ? vector_from_json(j.at("x_c0"), path + ".x_c0")
                 : Vector(Vector::Zero(dims.n_xc));
  cfg.x_aT1 = j.contains("x_aT1")
                  ? vector_from_json(j.at("x_aT1"), path + ".x_aT1")
                  : Vector(Vector::Zero(dims.n_xa));
  if (cfg.x_c0.size() != dims.n_xc || cfg.x_aT1.size() != dims.n_xa) {
    throw ValidationError(path + ": boundary state sizes disagree with --dims");
  }
  return cfg;
}

void save_manifest(const std::string& path, const RunManifest& manifest) {
  Json j;
  j["tool_version"] = manifest.tool_version;
  j["command"] = manifest.command;
  j["config"] = manifest.config_echo;
  j["seeds"] = manifest.seeds;
  j["input_hashes"] = manifest.input_hashes;
  j["wall_clock_seconds"] = manifest.wall_clock_seconds;
  j["stop_reason"] = manifest.stop_reason;
  j["artifacts"] = manifest.artifacts;
  write_file(path, dump_json(j));
}

}  // namespace ncrsm
