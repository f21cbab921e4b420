#pragma once

#include "gendid/types.hpp"

#include <cmath>
#include <string>

namespace gendid {

enum class CovStructure { Independent, Exchangeable, Ar1, Custom };

std::string to_string(CovStructure s);

// Working covariance M (up to scale) over the unit-major observation vector.
// rel_sd holds relative standard deviations, so diag(M) = rel_sd^2.
struct WorkingCovariance {
  CovStructure structure = CovStructure::Independent;
  double rho = 0.0;
  Vector rel_sd;
  Matrix matrix;
};

// Within-unit correlation block (J x J) with unit diagonal.
template <typename Scalar>
Mat<Scalar> correlation_block(CovStructure s, Scalar rho, Index n_periods) {
  Mat<Scalar> r = Mat<Scalar>::Identity(n_periods, n_periods);
  if (s == CovStructure::Independent) return r;
  for (Index a = 0; a < n_periods; ++a)
    for (Index b = 0; b < n_periods; ++b) {
      if (a == b) continue;
      r(a, b) = s == CovStructure::Exchangeable
                    ? rho
                    : static_cast<Scalar>(std::pow(rho, static_cast<Scalar>(std::abs(a - b))));
    }
  return r;
}

// Relative PSD check: min eigenvalue >= -tol * max(1, max |eigenvalue|).
bool is_psd(const Matrix& m, double tol = 1e-10);

// rel_sd empty means all ones.
WorkingCovariance build_m(CovStructure structure, double rho, int n_units, int n_periods,
                          const Vector& rel_sd = Vector());

WorkingCovariance custom_m(Matrix m);
WorkingCovariance load_custom_m(const std::string& path);

// "independent" | "exchangeable" | "ar1" | "custom:<path>".
WorkingCovariance parse_covariance(const std::string& spec, double rho, int n_units,
                                   int n_periods, const Vector& rel_sd = Vector());

}  // namespace gendid
