#include "doctest.h"
#include "oracle.hpp"

#include "gendid/solver.hpp"

using namespace gendid;

namespace {

const Setting kSettings[] = {Setting::S1, Setting::S2, Setting::S3, Setting::S4, Setting::S5};
const CovStructure kStructures[] = {CovStructure::Independent, CovStructure::Exchangeable,
                                    CovStructure::Ar1};

WorkingCovariance identity(int n, int J) { return build_m(CovStructure::Independent, 0, n, J); }

Vector vec(std::initializer_list<double> x) {
  Vector v(static_cast<Index>(x.size()));
  Index k = 0;
  for (double d : x) v(k++) = d;
  return v;
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("toy feasibility classes") {
  const auto p = oracle::toy();
  const auto s4 = build_f(Setting::S4, p);
  CHECK(feasibility(s4, vec({0, 1}), 2, 3).cls == FeasibilityClass::Infeasible);
  CHECK(feasibility(s4, vec({1, 0}), 2, 3).cls == FeasibilityClass::Underdetermined);

  const auto s3 = feasibility(build_f(Setting::S3, p), vec({1, 0}), 2, 3);
  CHECK(s3.cls == FeasibilityClass::Underdetermined);
  CHECK(s3.free_dim == 0);
  CHECK(s3.rank_f == 2);

  const auto s5 = feasibility(build_f(Setting::S5, p), vec({1}), 2, 3);
  CHECK(s5.cls == FeasibilityClass::Underdetermined);
  CHECK(s5.free_dim == 1);
  CHECK(s5.w_nullity == 2);
}

TEST_CASE("unique class when F has full row rank") {
  // One pair of units, two periods: a single DID.
  const auto p = AdoptionPattern::from_times(2, {2, 3});
  const auto f = feasibility(build_f(Setting::S5, p), vec({1}), 2, 2);
  CHECK(f.cls == FeasibilityClass::Unique);
}

TEST_CASE("toy weights") {
  const auto p = oracle::toy();
  const DidSystem sys(p);
  const auto M = identity(2, 3);

  const auto s5 = solve_min_variance(sys, build_f(Setting::S5, p), vec({1}), M);
  CHECK((s5.obs_weights - vec({-0.5, 1, -0.5, 0.5, -1, 0.5})).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(s5.scaled_variance == doctest::Approx(3.0));

  // S3 solutions are determined by the constraint, whatever M is.
  std::mt19937_64 g(1);
  for (auto s : kStructures) {
    const WorkingCovariance m{s, 0, {}, oracle::random_m(g, s, 2, 3)};
    const auto f3 = build_f(Setting::S3, p);
    const auto avg = solve_min_variance(sys, f3, vec({0.5, 0.5}), m);
    CHECK((avg.obs_weights - vec({-1.5, 1, 0.5, 1.5, -1, -0.5})).cwiseAbs().maxCoeff() < 1e-9);
    const auto first = solve_min_variance(sys, f3, vec({1, 0}), m);
    CHECK((first.obs_weights - vec({-1, 1, 0, 1, -1, 0})).cwiseAbs().maxCoeff() < 1e-9);
  }

  try {
    solve_min_variance(sys, build_f(Setting::S4, p), vec({0, 1}), M);
    FAIL("expected an infeasibility error");
  } catch (const InfeasibleEstimandError& e) {
    CHECK(e.feasibility().rank_f_aug == 2);
    CHECK(e.kind() == ErrorKind::Infeasible);
  }
}

TEST_CASE("minimum-norm representative") {
  // Any w with the same observation weights differs by ker(A^T); the
  // returned w has no component there.
  std::mt19937_64 g(2);
  for (int rep = 0; rep < 20; ++rep) {
    const auto p = oracle::random_design(g, 5, 5);
    const DidSystem sys(p);
    const auto f = build_f(Setting::S5, p);
    if (!f.catalog.identifiable[0]) continue;
    const auto sol = solve_min_variance(sys, f, vec({1}), identity(p.n_units(), p.n_periods()));
    const Matrix A = oracle::a_matrix(p.n_units(), p.n_periods());
    const Matrix K = oracle::null_space(A.transpose());
    if (K.cols()) CHECK((K.transpose() * sol.w).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("matches the literal weight-space optimum") {
  std::mt19937_64 g(17);
  int solved = 0;
  for (int rep = 0; rep < 40; ++rep) {
    const auto p = oracle::random_design(g, 5, 5);
    const int n = p.n_units(), J = p.n_periods();
    const DidSystem sys(p);
    const Matrix A = oracle::a_matrix(n, J);
    for (auto s : kSettings) {
      const auto f = build_f(s, p);
      const Vector v = oracle::random_feasible_v(g, f.matrix);
      if (v.isZero()) continue;
      const auto cs = kStructures[rep % 3];
      const Matrix M = oracle::random_m(g, cs, n, J);
      const auto sol = solve_min_variance(sys, f, v, WorkingCovariance{cs, 0, {}, M});

      const Matrix Ft = f.matrix.transpose();
      const Vector w0 = oracle::pinv(Ft) * v;
      const Matrix Z = oracle::null_space(Ft);
      const Matrix Q = A * M * A.transpose();
      Vector w = w0;
      if (Z.cols()) w -= Z * (oracle::pinv(Z.transpose() * Q * Z) * (Z.transpose() * Q * w0));
      CHECK((A.transpose() * w - sol.obs_weights).cwiseAbs().maxCoeff() < 1e-7);
      CHECK(sol.scaled_variance == doctest::Approx(w.dot(Q * w)).epsilon(1e-8));
      CHECK(sol.constraint_residual <= 1e-8 * (1 + v.cwiseAbs().maxCoeff()));
      ++solved;
    }
  }
  CHECK(solved > 100);
}

TEST_CASE("KKT and probe optimality") {
  std::mt19937_64 g(23);
  for (int rep = 0; rep < 20; ++rep) {
    const auto p = oracle::random_design(g);
    const int n = p.n_units(), J = p.n_periods();
    const DidSystem sys(p);
    const Matrix A = oracle::a_matrix(n, J);
    const auto f = build_f(rep % 2 ? Setting::S3 : Setting::S2, p);
    const Vector v = oracle::random_feasible_v(g, f.matrix);
    if (v.isZero()) continue;
    for (auto cs : kStructures) {
      const Matrix M = oracle::random_m(g, cs, n, J);
      const auto sol = solve_min_variance(sys, f, v, WorkingCovariance{cs, 0, {}, M});
      const auto chk = oracle::check_optimum(g, A, f.matrix, M, v, sol.w);
      CHECK(chk.kkt <= 1e-8);
      CHECK(chk.worst_probe >= -1e-10);
      CHECK(chk.feasibility <= 1e-8);
    }
  }
}

TEST_CASE("observation weights have zero margins") {
  std::mt19937_64 g(29);
  for (int rep = 0; rep < 20; ++rep) {
    const auto p = oracle::random_design(g);
    const int n = p.n_units(), J = p.n_periods();
    const auto f = build_f(Setting::S5, p);
    if (!f.catalog.identifiable[0]) continue;
    const auto sol = solve_min_variance(DidSystem(p), f, vec({1}), identity(n, J));
    for (int i = 0; i < n; ++i) CHECK(std::abs(sol.obs_weights.segment(i * J, J).sum()) < 1e-9);
    for (int j = 0; j < J; ++j) {
      double s = 0;
      for (int i = 0; i < n; ++i) s += sol.obs_weights(i * J + j);
      CHECK(std::abs(s) < 1e-9);
    }
  }
}

TEST_CASE("scale invariance in M") {
  std::mt19937_64 g(31);
  for (int rep = 0; rep < 15; ++rep) {
    const auto p = oracle::random_design(g);
    const int n = p.n_units(), J = p.n_periods();
    const DidSystem sys(p);
    const auto f = build_f(Setting::S2, p);
    const Vector v = oracle::random_feasible_v(g, f.matrix);
    if (v.isZero()) continue;
    const Matrix M = oracle::random_m(g, CovStructure::Ar1, n, J);
    const auto a = solve_min_variance(sys, f, v, WorkingCovariance{CovStructure::Custom, 0, {}, M});
    const auto b = solve_min_variance(sys, f, v, WorkingCovariance{CovStructure::Custom, 0, {}, 7.5 * M});
    CHECK((a.obs_weights - b.obs_weights).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(b.scaled_variance == doctest::Approx(7.5 * a.scaled_variance));
  }
}

TEST_CASE("unbiased on noiseless panels") {
  std::mt19937_64 g(37);
  std::normal_distribution<double> z;
  int checked = 0;
  for (int rep = 0; rep < 60; ++rep) {
    const auto p = oracle::random_design(g);
    const int n = p.n_units(), J = p.n_periods();
    const auto s = kSettings[rep % 5];
    const auto f = build_f(s, p);
    const Vector v = oracle::random_feasible_v(g, f.matrix);
    if (v.isZero()) continue;
    Vector theta(f.catalog.size());
    for (auto& x : theta) x = z(g);
    const Matrix y = oracle::noiseless_outcomes(g, s, p, f.catalog, theta);
    const auto sol = solve_min_variance(DidSystem(p), f, v, identity(n, J));
    double est = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < J; ++j) est += sol.obs_weights(i * J + j) * y(i, j);
    CHECK(std::abs(est - v.dot(theta)) <= 1e-8 * (1 + y.cwiseAbs().maxCoeff()));
    ++checked;
  }
  CHECK(checked > 30);
}

TEST_CASE("relative efficiency on the 14x8 stepped wedge") {
  const auto p = oracle::stepped_wedge();
  const DidSystem sys(p);
  const auto M = build_m(CovStructure::Exchangeable, 0.003, 14, 8);
  auto solve = [&](Setting s, const std::string& e) {
    const auto f = build_f(s, p);
    return solve_min_variance(sys, f, parse_estimand(e, f.catalog).v, M);
  };
  const auto s5 = solve(Setting::S5, "attw");
  CHECK(relative_efficiency(solve(Setting::S4, "avg:j=2..7"), s5) == doctest::Approx(1.05).epsilon(0.02));
  CHECK(relative_efficiency(solve(Setting::S3, "avg:a=1..7"), s5) == doctest::Approx(2.76).epsilon(0.01));
  CHECK(relative_efficiency(solve(Setting::S2, "attw"), s5) == doctest::Approx(1.77).epsilon(0.01));
  CHECK(relative_efficiency(s5, s5) == 1.0);
  WeightSolution zero;
  CHECK_THROWS_AS(relative_efficiency(s5, zero), DegenerateVarianceError);
}

TEST_CASE("centered basis is orthonormal and orthogonal to ones") {
  for (Index n = 2; n <= 7; ++n) {
    const Matrix B = centered_basis(n);
    CHECK((B.transpose() * B - Matrix::Identity(n - 1, n - 1)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((B.transpose() * Vector::Ones(n)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("scaled variance") {
  const DidSystem sys(oracle::toy());
  CHECK(scaled_variance(Vector::Zero(3), sys, Matrix::Identity(6, 6)) == 0.0);
  CHECK(scaled_variance(vec({1, 0, 0}), sys, Matrix::Identity(6, 6)) == doctest::Approx(4.0));
}

}
