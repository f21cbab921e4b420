#pragma once

#include "gendid/assumptions.hpp"
#include "gendid/covariance.hpp"
#include "gendid/didmat.hpp"

#include <string>

namespace gendid {

enum class FeasibilityClass { Infeasible, Unique, Underdetermined };

std::string to_string(FeasibilityClass c);

struct Feasibility {
  FeasibilityClass cls = FeasibilityClass::Infeasible;
  int rank_f = 0;
  int rank_f_aug = 0;
  // Dimension of distinct unbiased estimators, (N-1)(J-1) - rank(F); 0 unless
  // Underdetermined.
  int free_dim = 0;
  // Raw dimension of the weight solution space, C(N,2)C(J,2) - rank(F).
  Index w_nullity = 0;

  std::string report() const;
};

// Singular values below 1e-10 * sigma_max * max(rows, cols) count as zero.
double rank_threshold(const Eigen::VectorXd& singular_values, Index rows, Index cols);
int numerical_rank(const Matrix& m);

Feasibility feasibility(const FMatrix& f, const Vector& v, int n_units, int n_periods);

class InfeasibleEstimandError : public Error {
 public:
  explicit InfeasibleEstimandError(Feasibility f)
      : Error(ErrorKind::Infeasible, "InfeasibleEstimandError: no unbiased estimator exists; " + f.report()),
        feasibility_(f) {}
  const Feasibility& feasibility() const { return feasibility_; }

 private:
  Feasibility feasibility_;
};

struct WeightSolution {
  Vector w;            // DID weights
  Vector obs_weights;  // A^T w, unit-major
  double scaled_variance = 0.0;
  Feasibility feasibility;
  double constraint_residual = 0.0;  // ||F^T w - v||_inf
};

// Minimum working-variance w subject to F^T w = v; the minimum-norm
// representative among equivalent minimizers.
WeightSolution solve_min_variance(const DidSystem& system, const FMatrix& f, const Vector& v,
                                  const WorkingCovariance& m);

// w^T A M A^T w.
double scaled_variance(const Vector& w, const DidSystem& system, const Matrix& m);

double relative_efficiency(const WeightSolution& a, const WeightSolution& b);

// Orthonormal basis (n x n-1) of the complement of the ones vector.
Matrix centered_basis(Index n);

}  // namespace gendid
