#include "doctest.h"
#include "oracle.hpp"

#include "gendid/didmat.hpp"

using namespace gendid;

namespace {

// Type straight from the four treatment indicators of a comparison.
int brute_type(const AdoptionPattern& p, const DidIndex& d) {
  auto state = [&](int u) {
    const bool a = p.treated(u, d.j), b = p.treated(u, d.j_prime);
    return a ? 2 : (b ? 1 : 0);  // 0 untreated, 1 switches, 2 treated throughout
  };
  const int s = state(d.i), t = state(d.i_prime);
  const int hi = std::max(s, t), lo = std::min(s, t);
  if (hi == 0) return 1;
  if (hi == 1 && lo == 0) return 2;
  if (hi == 2 && lo == 0) return 3;
  if (hi == 1 && lo == 1) return 4;
  if (hi == 2 && lo == 1) return 5;
  return 6;
}

}  // namespace

TEST_SUITE("didmat") {

TEST_CASE("toy A matrix") {
  Matrix expect(3, 6);
  expect << -1, 1, 0, 1, -1, 0,
            -1, 0, 1, 1, 0, -1,
             0, -1, 1, 0, 1, -1;
  CHECK(build_a_matrix(2, 3).cast<double>() == expect);
  DidSystem sys(oracle::toy());
  CHECK(sys.types() == std::vector<std::uint8_t>{2, 4, 5});
}

TEST_CASE("A agrees with the sorted-tuple construction") {
  for (int n = 2; n <= 6; ++n)
    for (int J = 2; J <= 6; ++J) {
      CAPTURE(n);
      CAPTURE(J);
      const Matrix A = build_a_matrix(n, J).cast<double>();
      CHECK(A == oracle::a_matrix(n, J));
      CHECK(A.rows() == did_count(n, J));
    }
}

TEST_CASE("rank law") {
  for (int n = 2; n <= 6; ++n)
    for (int J = 2; J <= 6; ++J)
      CHECK(oracle::rank(build_a_matrix(n, J).cast<double>()) == (n - 1) * (J - 1));
}

TEST_CASE("row index round trip") {
  for (int n = 2; n <= 5; ++n)
    for (int J = 2; J <= 5; ++J) {
      std::int64_t expect = 1;
      for_each_did(n, J, [&](std::int64_t r, const DidIndex& d) {
        CHECK(r + 1 == expect);
        CHECK(did_row_index(d, n, J) == expect);
        CHECK(row_to_index(expect, n, J) == d);
        ++expect;
      });
    }
  CHECK_THROWS_AS(row_to_index(0, 3, 3), IndexError);
  CHECK_THROWS_AS(did_row_index(DidIndex{2, 1, 1, 2}, 3, 3), IndexError);
  CHECK_THROWS_AS(build_a_matrix(1, 4), DesignTooSmallError);
}

TEST_CASE("type classification and counts") {
  std::mt19937_64 g(11);
  for (int rep = 0; rep < 60; ++rep) {
    const auto p = oracle::random_design(g);
    std::array<std::int64_t, 6> counts{};
    for_each_did(p.n_units(), p.n_periods(), [&](std::int64_t, const DidIndex& d) {
      const int t = brute_type(p, d);
      CHECK(classify_did(d, p) == t);
      ++counts[t - 1];
    });
    CHECK(count_types(p) == counts);
  }
}

TEST_CASE("operator products match dense algebra") {
  std::mt19937_64 g(5);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 30; ++rep) {
    const auto p = oracle::random_design(g);
    DidSystem sys(p);
    const Matrix A = oracle::a_matrix(p.n_units(), p.n_periods());
    Vector y(A.cols()), w(A.rows());
    for (auto& x : y) x = z(g);
    for (auto& x : w) x = z(g);
    CHECK((sys.apply(y) - A * y).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((sys.apply_transpose(w) - A.transpose() * w).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((sys.gram() - A.transpose() * A).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(sys.a_matrix().cast<double>() == A);
  }
}

TEST_CASE("observation weights of any DID combination have zero margins") {
  std::mt19937_64 g(8);
  std::normal_distribution<double> z;
  const auto p = oracle::random_pattern(g, 5, 4, false);
  DidSystem sys(p);
  Vector w(sys.n_rows());
  for (auto& x : w) x = z(g);
  const Vector o = sys.apply_transpose(w);
  const Eigen::Map<const Eigen::Matrix<double, -1, -1, Eigen::RowMajor>> O(o.data(), 5, 4);
  CHECK(O.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  CHECK(O.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("system needs canonical order") {
  const auto p = AdoptionPattern::from_times(3, {3, 2});
  CHECK_THROWS_AS(DidSystem{p}, IndexError);
}

}
