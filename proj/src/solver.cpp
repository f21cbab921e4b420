#include "gendid/solver.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <sstream>

namespace gendid {

std::string to_string(FeasibilityClass c) {
  switch (c) {
    case FeasibilityClass::Infeasible: return "infeasible";
    case FeasibilityClass::Unique: return "unique";
    case FeasibilityClass::Underdetermined: return "underdetermined";
  }
  return {};
}

std::string Feasibility::report() const {
  std::ostringstream os;
  os << "class=" << to_string(cls) << " rank(F^T)=" << rank_f << " rank(F^T|v)=" << rank_f_aug
     << " free_dim=" << free_dim << " w_nullity=" << w_nullity;
  return os.str();
}

double rank_threshold(const Eigen::VectorXd& sv, Index rows, Index cols) {
  if (sv.size() == 0) return 0.0;
  return 1e-10 * sv.maxCoeff() * static_cast<double>(std::max(rows, cols));
}

namespace {

int rank_from(const Eigen::VectorXd& sv, Index rows, Index cols) {
  if (sv.size() == 0 || sv.maxCoeff() == 0.0) return 0;
  const double tol = rank_threshold(sv, rows, cols);
  return static_cast<int>((sv.array() > tol).count());
}

// Moore-Penrose solve with the shared rank rule.
Matrix pinv(const Matrix& m) {
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const int r = rank_from(sv, m.rows(), m.cols());
  Matrix out = Matrix::Zero(m.cols(), m.rows());
  for (int k = 0; k < r; ++k)
    out.noalias() += svd.matrixV().col(k) * (1.0 / sv(k)) * svd.matrixU().col(k).transpose();
  return out;
}

}  // namespace

int numerical_rank(const Matrix& m) {
  if (m.size() == 0) return 0;
  Eigen::BDCSVD<Matrix> svd(m);
  return rank_from(svd.singularValues(), m.rows(), m.cols());
}

Feasibility feasibility(const FMatrix& f, const Vector& v, int n_units, int n_periods) {
  if (v.size() != f.matrix.cols())
    throw DimensionError("estimand vector has length " + std::to_string(v.size()) +
                         ", expected |theta|=" + std::to_string(f.matrix.cols()));
  Feasibility out;
  out.rank_f = numerical_rank(f.matrix);
  // (F^T | v) has the same rank as F stacked over v^T.
  Matrix aug(f.matrix.rows() + 1, f.matrix.cols());
  aug << f.matrix, v.transpose();
  out.rank_f_aug = numerical_rank(aug);
  const Index n_rows = f.matrix.rows();
  out.w_nullity = n_rows - out.rank_f;
  if (out.rank_f_aug > out.rank_f) {
    out.cls = FeasibilityClass::Infeasible;
  } else if (out.rank_f == n_rows) {
    out.cls = FeasibilityClass::Unique;
  } else {
    out.cls = FeasibilityClass::Underdetermined;
    out.free_dim = (n_units - 1) * (n_periods - 1) - out.rank_f;
  }
  return out;
}

Matrix centered_basis(Index n) {
  // Normalized Helmert contrasts.
  Matrix q = Matrix::Zero(n, n - 1);
  for (Index k = 1; k < n; ++k) {
    const double s = 1.0 / std::sqrt(static_cast<double>(k * (k + 1)));
    q.col(k - 1).head(k).setConstant(s);
    q(k, k - 1) = -static_cast<double>(k) * s;
  }
  return q;
}

WeightSolution solve_min_variance(const DidSystem& sys, const FMatrix& f, const Vector& v,
                                  const WorkingCovariance& m) {
  const int N = sys.n_units();
  const int J = sys.n_periods();
  const Index NJ = sys.n_obs();
  if (f.matrix.rows() != sys.n_rows())
    throw DimensionError("F has " + std::to_string(f.matrix.rows()) + " rows, A has " +
                         std::to_string(sys.n_rows()));
  if (m.matrix.rows() != NJ || m.matrix.cols() != NJ)
    throw DimensionError("working covariance is " + std::to_string(m.matrix.rows()) + "x" +
                         std::to_string(m.matrix.cols()) + ", expected " + std::to_string(NJ));

  WeightSolution sol;
  sol.feasibility = feasibility(f, v, N, J);
  if (sol.feasibility.cls == FeasibilityClass::Infeasible)
    throw InfeasibleEstimandError(sol.feasibility);

  // Every estimator w^T A y is a double-centered observation weighting o = A^T w,
  // i.e. o = B z with B spanning row(A). Since ker(A^T) lies in ker(F^T), F = (A B) G^T
  // and the constraint F^T w = v becomes G z = v.
  Matrix q_units = centered_basis(N);
  Matrix q_periods = centered_basis(J);
  Matrix basis(NJ, q_units.cols() * q_periods.cols());
  for (Index a = 0; a < q_units.cols(); ++a)
    for (Index b = 0; b < q_periods.cols(); ++b)
      for (Index i = 0; i < N; ++i)
        basis.col(a * q_periods.cols() + b).segment(i * J, J) = q_units(i, a) * q_periods.col(b);

  Matrix at_f = Matrix::Zero(NJ, f.matrix.cols());
  for_each_did(N, J, [&](std::int64_t r, const DidIndex& idx) {
    const auto row = f.matrix.row(r);
    if (row.isZero(0.0)) return;
    const auto t = row_terms(idx, J);
    for (int k = 0; k < 4; ++k) at_f.row(t.col[k]) += t.sign[k] * row;
  });
  const Matrix gram_b = basis.transpose() * sys.gram() * basis;  // B^T A^T A B
  Eigen::LLT<Matrix> gram_llt(gram_b);
  if (gram_llt.info() != Eigen::Success) throw NumericalError("A B is not of full column rank");
  const Matrix g = gram_llt.solve(basis.transpose() * at_f).transpose();  // |theta| x r

  // Null-space parameterization z = z0 + Z c of {z : G z = v}.
  Eigen::BDCSVD<Matrix> svd(g, Eigen::ComputeFullV);
  const int rank_g = rank_from(svd.singularValues(), g.rows(), g.cols());
  const Matrix& vmat = svd.matrixV();
  Vector z0 = Vector::Zero(g.cols());
  {
    Eigen::BDCSVD<Matrix> thin(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = thin.singularValues();
    for (int k = 0; k < rank_g; ++k)
      z0 += thin.matrixV().col(k) * (thin.matrixU().col(k).dot(v) / sv(k));
  }
  const Matrix mb = basis.transpose() * m.matrix * basis;
  Vector z = z0;
  const Index free = g.cols() - rank_g;
  if (free > 0) {
    const Matrix null_g = vmat.rightCols(free);
    const Matrix q = null_g.transpose() * mb * null_g;
    const Vector c = -pinv(q) * (null_g.transpose() * mb * z0);
    z += null_g * c;
  }

  sol.obs_weights = basis * z;
  // Minimum-norm w with A^T w = B z is A B (B^T A^T A B)^{-1} z.
  sol.w = sys.apply(basis * gram_llt.solve(z));
  sol.scaled_variance = sol.obs_weights.dot(m.matrix * sol.obs_weights);
  sol.constraint_residual =
      v.size() == 0 ? 0.0 : (f.matrix.transpose() * sol.w - v).cwiseAbs().maxCoeff();
  if (!(sol.constraint_residual <= 1e-8 * (1.0 + v.cwiseAbs().maxCoeff())))
    throw NumericalError("constraint residual " + std::to_string(sol.constraint_residual) +
                         " exceeds tolerance");
  return sol;
}

double scaled_variance(const Vector& w, const DidSystem& system, const Matrix& m) {
  const Vector o = system.apply_transpose(w);
  return std::max(0.0, o.dot(m * o));
}

double relative_efficiency(const WeightSolution& a, const WeightSolution& b) {
  if (!(b.scaled_variance > 0.0))
    throw DegenerateVarianceError("reference estimator has zero scaled variance");
  return a.scaled_variance / b.scaled_variance;
}

}  // namespace gendid
