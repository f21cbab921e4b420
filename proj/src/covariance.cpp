#include "gendid/covariance.hpp"

#include "gendid/csv.hpp"

#include <Eigen/Eigenvalues>

namespace gendid {

std::string to_string(CovStructure s) {
  switch (s) {
    case CovStructure::Independent: return "independent";
    case CovStructure::Exchangeable: return "exchangeable";
    case CovStructure::Ar1: return "ar1";
    case CovStructure::Custom: return "custom";
  }
  return {};
}

bool is_psd(const Matrix& m, double tol) {
  if (m.rows() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) return false;
  const auto& ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  return ev.minCoeff() >= -tol * scale;
}

WorkingCovariance build_m(CovStructure structure, double rho, int n_units, int n_periods,
                          const Vector& rel_sd) {
  const Index NJ = static_cast<Index>(n_units) * n_periods;
  if (n_units < 1 || n_periods < 1) throw CovarianceParamError("empty design");
  if (structure == CovStructure::Custom)
    throw CovarianceParamError("custom structures are loaded from a matrix file");
  if (structure == CovStructure::Exchangeable) {
    const double lower = n_periods > 1 ? -1.0 / (n_periods - 1) : -1.0;
    if (!(rho >= lower && rho < 1.0))
      throw CovarianceParamError("exchangeable rho must lie in [" + csv::format_number(lower) +
                                 ", 1), got " + csv::format_number(rho));
  }
  if (structure == CovStructure::Ar1 && !(std::abs(rho) < 1.0))
    throw CovarianceParamError("ar1 rho must satisfy |rho| < 1, got " + csv::format_number(rho));

  Vector sd = rel_sd.size() == 0 ? Vector::Ones(NJ) : rel_sd;
  if (sd.size() != NJ)
    throw CovarianceParamError("relative SD vector has length " + std::to_string(sd.size()) +
                               ", expected " + std::to_string(NJ));
  if (!(sd.array() > 0.0).all() || !sd.allFinite())
    throw CovarianceParamError("relative SDs must be strictly positive");

  const Matrix block = correlation_block<double>(structure, rho, n_periods);
  Matrix m = Matrix::Zero(NJ, NJ);
  for (Index i = 0; i < n_units; ++i) m.block(i * n_periods, i * n_periods, n_periods, n_periods) = block;
  m = sd.asDiagonal() * m * sd.asDiagonal();
  // Block-diagonal: PSD iff every block is.
  for (Index i = 0; i < n_units; ++i)
    if (!is_psd(m.block(i * n_periods, i * n_periods, n_periods, n_periods)))
      throw CovarianceParamError("working covariance is not positive semidefinite");
  WorkingCovariance w;
  w.structure = structure;
  w.rho = structure == CovStructure::Independent ? 0.0 : rho;
  w.rel_sd = std::move(sd);
  w.matrix = std::move(m);
  return w;
}

WorkingCovariance custom_m(Matrix m) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw CovarianceParamError("custom covariance must be square, got " +
                               std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  if (!m.allFinite()) throw CovarianceParamError("custom covariance has non-finite entries");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw CovarianceParamError("custom covariance is not symmetric");
  if (!is_psd(m)) throw CovarianceParamError("custom covariance is not positive semidefinite");
  WorkingCovariance w;
  w.structure = CovStructure::Custom;
  w.rel_sd = m.diagonal().cwiseMax(0.0).cwiseSqrt();
  w.matrix = 0.5 * (m + m.transpose());
  return w;
}

WorkingCovariance load_custom_m(const std::string& path) {
  Matrix m;
  try {
    m = csv::read_matrix_file(path);
  } catch (const ParseError& e) {
    throw CovarianceParamError(e.what());
  }
  return custom_m(std::move(m));
}

WorkingCovariance parse_covariance(const std::string& spec, double rho, int n_units,
                                   int n_periods, const Vector& rel_sd) {
  if (spec == "independent") return build_m(CovStructure::Independent, 0.0, n_units, n_periods, rel_sd);
  if (spec == "exchangeable") return build_m(CovStructure::Exchangeable, rho, n_units, n_periods, rel_sd);
  if (spec == "ar1") return build_m(CovStructure::Ar1, rho, n_units, n_periods, rel_sd);
  if (spec.rfind("custom:", 0) == 0) {
    auto w = load_custom_m(spec.substr(7));
    const Index NJ = static_cast<Index>(n_units) * n_periods;
    if (w.matrix.rows() != NJ)
      throw CovarianceParamError("custom covariance is " + std::to_string(w.matrix.rows()) +
                                 "x" + std::to_string(w.matrix.rows()) + ", expected NJ=" +
                                 std::to_string(NJ));
    return w;
  }
  throw CovarianceParamError("unknown covariance '" + spec +
                             "' (expected independent|exchangeable|ar1|custom:<path>)");
}

}  // namespace gendid
