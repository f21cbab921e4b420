#include "doctest.h"
#include "oracle.hpp"

#include "gendid/covariance.hpp"

#include <Eigen/Eigenvalues>

#include <cstdio>
#include <fstream>

using namespace gendid;

TEST_SUITE("covariance") {

TEST_CASE("block structure") {
  const auto m = build_m(CovStructure::Exchangeable, 0.3, 3, 4).matrix;
  CHECK(m.rows() == 12);
  CHECK(m(0, 1) == doctest::Approx(0.3));
  CHECK(m(0, 4) == 0.0);
  CHECK(m.diagonal() == Vector::Ones(12));

  const auto a = build_m(CovStructure::Ar1, 0.5, 2, 4).matrix;
  CHECK(a(0, 3) == doctest::Approx(0.125));
  CHECK(a(5, 7) == doctest::Approx(0.25));
  CHECK(a(3, 4) == 0.0);
}

TEST_CASE("ar1 with rho 0 is independence") {
  CHECK(build_m(CovStructure::Ar1, 0.0, 3, 5).matrix == build_m(CovStructure::Independent, 0.7, 3, 5).matrix);
}

TEST_CASE("an exchangeable block has two distinct eigenvalues") {
  const int J = 6;
  const double rho = 0.25;
  const Matrix block = correlation_block<double>(CovStructure::Exchangeable, rho, J);
  Eigen::SelfAdjointEigenSolver<Matrix> es(block);
  const auto ev = es.eigenvalues();
  for (int k = 0; k < J - 1; ++k) CHECK(ev(k) == doctest::Approx(1 - rho));
  CHECK(ev(J - 1) == doctest::Approx(1 + (J - 1) * rho));
}

TEST_CASE("correlation block works on other scalars") {
  const Mat<float> f = correlation_block<float>(CovStructure::Ar1, 0.5f, 3);
  CHECK(f(0, 2) == doctest::Approx(0.25));
  const Mat<long double> l = correlation_block<long double>(CovStructure::Exchangeable, 0.1L, 3);
  CHECK(static_cast<double>(l(1, 2)) == doctest::Approx(0.1));
}

TEST_CASE("relative SDs scale rows and columns") {
  Vector sd(4);
  sd << 1, 2, 3, 4;
  const auto m = build_m(CovStructure::Exchangeable, 0.5, 2, 2, sd).matrix;
  CHECK(m(0, 0) == doctest::Approx(1));
  CHECK(m(1, 1) == doctest::Approx(4));
  CHECK(m(2, 3) == doctest::Approx(0.5 * 12));
  CHECK(is_psd(m));
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(build_m(CovStructure::Ar1, 1.0, 2, 3), CovarianceParamError);
  CHECK_THROWS_AS(build_m(CovStructure::Exchangeable, -0.6, 2, 3), CovarianceParamError);
  CHECK_NOTHROW(build_m(CovStructure::Exchangeable, -0.5, 2, 3));
  CHECK_THROWS_AS(build_m(CovStructure::Independent, 0, 2, 3, Vector::Ones(5)), CovarianceParamError);
  CHECK_THROWS_AS(build_m(CovStructure::Independent, 0, 2, 3, -Vector::Ones(6)), CovarianceParamError);
  Matrix bad(2, 2);
  bad << 1, 2, 2, 1;
  CHECK_THROWS_AS(custom_m(bad), CovarianceParamError);
  bad << 1, 0.5, 0.4, 1;
  CHECK_THROWS_AS(custom_m(bad), CovarianceParamError);
  CHECK_THROWS_AS(parse_covariance("toeplitz", 0, 2, 2), CovarianceParamError);
}

TEST_CASE("custom matrix from file") {
  const std::string path = "gendid_test_custom_m.csv";
  {
    std::ofstream out(path);
    out << "2,0.5,0,0\n0.5,1,0,0\n0,0,1,0\n0,0,0,1\n";
  }
  const auto w = parse_covariance("custom:" + path, 0, 2, 2);
  CHECK(w.structure == CovStructure::Custom);
  CHECK(w.matrix(0, 1) == doctest::Approx(0.5));
  CHECK(w.rel_sd(0) == doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS_AS(parse_covariance("custom:" + path, 0, 3, 2), CovarianceParamError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(parse_covariance("custom:" + path, 0, 2, 2), CovarianceParamError);
}

}
