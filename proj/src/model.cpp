#include "ncrsm/model.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace ncrsm {

namespace {

constexpr double kSymTol = 1e-10;
constexpr double kPsdTol = 1e-10;
constexpr double kProbTol = 1e-12;

void check_matrix_list(const std::vector<Matrix>& list, int expect_count,
                       int rows, int cols, const std::string& name,
                       ValidityReport& report) {
  if (static_cast<int>(list.size()) != expect_count) {
    std::ostringstream os;
    os << name << ": expected " << expect_count << " mode matrices, got "
       << list.size();
    report.violations.push_back(os.str());
    return;
  }
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (list[i].rows() != rows || list[i].cols() != cols) {
      std::ostringstream os;
      os << name << "[" << i + 1 << "]: expected " << rows << "x" << cols
         << ", got " << list[i].rows() << "x" << list[i].cols();
      report.violations.push_back(os.str());
    }
    if (!list[i].allFinite()) {
      std::ostringstream os;
      os << name << "[" << i + 1 << "]: contains non-finite entries";
      report.violations.push_back(os.str());
    }
  }
}

void check_covariance(const Matrix& m, bool require_pd, const std::string& name,
                      ValidityReport& report) {
  if (m.rows() != m.cols()) {
    report.violations.push_back(name + ": not square");
    return;
  }
  if (!m.allFinite()) {
    report.violations.push_back(name + ": contains non-finite entries");
    return;
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymTol * scale) {
    report.violations.push_back(name + ": not symmetric");
    return;
  }
  const double min_eig = min_eigenvalue(symmetrize(m));
  if (require_pd ? (min_eig <= 0.0) : (min_eig < -kPsdTol * scale)) {
    std::ostringstream os;
    os << name << ": not positive " << (require_pd ? "definite" : "semi-definite")
       << " (min eigenvalue " << min_eig << ")";
    report.violations.push_back(os.str());
  }
}

void check_probability(const Vector& v, int expect_len, const std::string& name,
                       ValidityReport& report) {
  if (v.size() != expect_len) {
    std::ostringstream os;
    os << name << ": expected length " << expect_len << ", got " << v.size();
    report.violations.push_back(os.str());
    return;
  }
  if (!v.allFinite()) {
    report.violations.push_back(name + ": contains non-finite entries");
    return;
  }
  if (v.minCoeff() < -kProbTol) {
    std::ostringstream os;
    os << name << ": negative entry " << v.minCoeff();
    report.violations.push_back(os.str());
  }
  if (std::abs(v.sum() - 1.0) > kProbTol * std::max<double>(1, v.size())) {
    std::ostringstream os;
    os << name << ": entries sum to " << v.sum() << ", expected 1";
    report.violations.push_back(os.str());
  }
}

}  // namespace

Dims ModelParams::dims() const {
  Dims d;
  d.m_c = static_cast<int>(A_c.size());
  d.m_a = static_cast<int>(A_a.size());
  d.n_xc = A_c.empty() ? 0 : static_cast<int>(A_c[0].rows());
  d.n_xa = A_a.empty() ? 0 : static_cast<int>(A_a[0].rows());
  d.n_y = Sigma_m.rows() > 0 ? static_cast<int>(Sigma_m.rows())
                             : (C_c.empty() ? 0 : static_cast<int>(C_c[0].rows()));
  return d;
}

ValidityReport validate(const ModelParams& params, const Dims& dims,
                        bool require_positive_definite) {
  ValidityReport report;
  if (!dims.valid()) {
    report.violations.push_back("dims: every size must be at least 1");
    report.ok = false;
    return report;
  }

  check_matrix_list(params.A_c, dims.m_c, dims.n_xc, dims.n_xc, "A_c", report);
  check_matrix_list(params.A_a, dims.m_a, dims.n_xa, dims.n_xa, "A_a", report);
  check_matrix_list(params.C_c, dims.m_c, dims.n_y, dims.n_xc, "C_c", report);
  check_matrix_list(params.C_a, dims.m_a, dims.n_y, dims.n_xa, "C_a", report);
  check_matrix_list(params.Sigma_c, dims.m_c, dims.n_xc, dims.n_xc, "Sigma_c",
                    report);
  check_matrix_list(params.Sigma_a, dims.m_a, dims.n_xa, dims.n_xa, "Sigma_a",
                    report);

  for (std::size_t i = 0; i < params.Sigma_c.size(); ++i) {
    check_covariance(params.Sigma_c[i], require_positive_definite,
                     "Sigma_c[" + std::to_string(i + 1) + "]", report);
  }
  for (std::size_t i = 0; i < params.Sigma_a.size(); ++i) {
    check_covariance(params.Sigma_a[i], require_positive_definite,
                     "Sigma_a[" + std::to_string(i + 1) + "]", report);
  }
  if (params.Sigma_m.rows() != dims.n_y || params.Sigma_m.cols() != dims.n_y) {
    std::ostringstream os;
    os << "Sigma_m: expected " << dims.n_y << "x" << dims.n_y << ", got "
       << params.Sigma_m.rows() << "x" << params.Sigma_m.cols();
    report.violations.push_back(os.str());
  } else {
    check_covariance(params.Sigma_m, require_positive_definite, "Sigma_m",
                     report);
  }

  check_probability(params.pi_c, dims.m_c, "pi_c", report);
  check_probability(params.pi_a, dims.m_a, "pi_a", report);

  report.ok = report.violations.empty();
  return report;
}

void validate_or_throw(const ModelParams& params, const Dims& dims,
                       bool require_positive_definite) {
  const ValidityReport report =
      validate(params, dims, require_positive_definite);
  if (report.ok) return;
  std::ostringstream os;
  os << "invalid model parameters:";
  for (const auto& v : report.violations) os << "\n  - " << v;
  throw ValidationError(os.str());
}

SpectralReport spectral_stability_hint(const ModelParams& params) {
  SpectralReport report;
  auto radius = [](const Matrix& a) {
    if (a.rows() == 0) return 0.0;
    return Eigen::EigenSolver<Matrix>(a, /*computeEigenvectors=*/false)
        .eigenvalues()
        .cwiseAbs()
        .maxCoeff();
  };
  for (const auto& a : params.A_c) report.radius_c.push_back(radius(a));
  for (const auto& a : params.A_a) report.radius_a.push_back(radius(a));
  for (double r : report.radius_c)
    if (r > 1.0) report.any_above_one = true;
  for (double r : report.radius_a)
    if (r > 1.0) report.any_above_one = true;
  return report;
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double min_eigenvalue(const Matrix& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

bool is_probability_vector(const Vector& v, double tol) {
  if (v.size() == 0 || !v.allFinite()) return false;
  if (v.minCoeff() < -tol) return false;
  return std::abs(v.sum() - 1.0) <= tol * std::max<double>(1, v.size());
}

}  // namespace ncrsm
