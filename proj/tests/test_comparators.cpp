#include "doctest.h"
#include "oracle.hpp"

#include "gendid/comparators.hpp"
#include "gendid/solver.hpp"

using namespace gendid;

namespace {

const char* kDidMethods[] = {"cs:simple", "cs:dynamic", "cs:group", "cs:calendar", "sa", "ch",
                             "co:1",      "co:2",       "co:3"};

Vector s5_identity(const AdoptionPattern& p) {
  Vector v(1);
  v << 1;
  return solve_min_variance(DidSystem(p), build_f(Setting::S5, p), v,
                            build_m(CovStructure::Independent, 0, p.n_units(), p.n_periods()))
      .obs_weights;
}

double max_margin(const Vector& o, int n, int J) {
  double worst = 0;
  for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(o.segment(i * J, J).sum()));
  for (int j = 0; j < J; ++j) {
    double s = 0;
    for (int i = 0; i < n; ++i) s += o(i * J + j);
    worst = std::max(worst, std::abs(s));
  }
  return worst;
}

}  // namespace

TEST_SUITE("comparators") {

TEST_CASE("toy weights") {
  const auto p = oracle::toy();
  Vector o(6);
  o << -0.5, 1, -0.5, 0.5, -1, 0.5;
  CHECK((tw_weights(p).obs_weights - o).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_FALSE(tw_weights(p).did_weights);
  for (const char* m : {"cs:simple", "cs:dynamic", "cs:group", "cs:calendar", "sa", "ch", "co:1", "co:2"}) {
    CAPTURE(m);
    const auto c = comparator(m, p);
    REQUIRE(c.did_weights);
    CHECK(*c.did_weights == Vector::Unit(3, 0));
  }
  const auto co3 = co_weights(p, 3);
  CHECK((*co3.did_weights)(2) < 0);
  CHECK(DidSystem(p).type(2) == 5);

  const auto np = np_weights(p, NpWeighting::Equal);
  o << 0, 1, 0, 0, -1, 0;
  CHECK(np.obs_weights == o);
  CHECK_FALSE(np.did_weights);
  CHECK(np_weights(p, NpWeighting::InvVar).obs_weights == o);
  CHECK(np_weights(p, NpWeighting::TreatedProp).obs_weights == o);
}

TEST_CASE("two-way fixed effects equals the homogeneous minimum-variance estimator") {
  std::mt19937_64 g(41);
  for (int rep = 0; rep < 50; ++rep) {
    std::uniform_int_distribution<int> dn(2, 8), dj(3, 7);
    const auto p = oracle::random_pattern(g, dn(g), dj(g), true, true);
    CHECK((tw_weights(p).obs_weights - s5_identity(p)).cwiseAbs().maxCoeff() < 1e-8);
  }
  CHECK((tw_weights(oracle::stepped_wedge()).obs_weights - s5_identity(oracle::stepped_wedge())).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("one-period switches with equal group weights coincide with crossover 1") {
  std::mt19937_64 g(43);
  int done = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto p = oracle::random_design(g, 8, 7);
    ComparatorSpec ch, co;
    try {
      ch = ch_weights(p);
    } catch (const DegenerateDesignError&) {
      CHECK_THROWS_AS(co_weights(p, 1), DegenerateDesignError);
      continue;
    }
    co = co_weights(p, 1);
    CHECK((ch.obs_weights - co.obs_weights).cwiseAbs().maxCoeff() < 1e-12);
    ++done;
  }
  CHECK(done > 50);
}

TEST_CASE("clean comparisons never use types 4 to 6") {
  std::mt19937_64 g(47);
  const CsAggregation aggs[] = {CsAggregation::Simple, CsAggregation::Dynamic, CsAggregation::Group,
                                CsAggregation::Calendar};
  for (int rep = 0; rep < 60; ++rep) {
    const auto p = rep == 0 ? oracle::stepped_wedge() : oracle::random_design(g, 7, 7);
    const DidSystem sys(p);
    for (auto a : aggs) {
      ComparatorSpec c;
      try {
        c = cs_weights(p, a);
      } catch (const DegenerateDesignError&) {
        continue;
      }
      for (Index r = 0; r < sys.n_rows(); ++r)
        if (sys.type(r) >= 4) CHECK((*c.did_weights)(r) == 0.0);
    }
  }
}

TEST_CASE("weights are consistent and sum to zero") {
  std::mt19937_64 g(53);
  for (int rep = 0; rep < 40; ++rep) {
    const auto p = oracle::random_design(g, 6, 6);
    const Matrix A = oracle::a_matrix(p.n_units(), p.n_periods());
    for (const char* m : kDidMethods) {
      ComparatorSpec c;
      try {
        c = comparator(m, p);
      } catch (const DegenerateDesignError&) {
        continue;
      }
      CAPTURE(m);
      REQUIRE(c.did_weights);
      CHECK((A.transpose() * *c.did_weights - c.obs_weights).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(max_margin(c.obs_weights, p.n_units(), p.n_periods()) < 1e-12);
    }
    for (const char* m : {"tw", "np:equal", "np:inv_var", "np:treated_prop"}) {
      Vector o;
      try {
        o = comparator(m, p).obs_weights;
      } catch (const DegenerateDesignError&) {
        continue;
      }
      CHECK(std::abs(o.sum()) < 1e-12);
    }
  }
}

TEST_CASE("comparators are unbiased under homogeneous effects") {
  std::mt19937_64 g(59);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 30; ++rep) {
    const auto p = oracle::random_design(g, 6, 6);
    const auto f = build_f(Setting::S5, p);
    Vector theta(1);
    theta << z(g);
    const Matrix y = oracle::noiseless_outcomes(g, Setting::S5, p, f.catalog, theta);
    const Vector flat = y.transpose().reshaped();
    for (const char* m : kDidMethods) {
      if (std::string(m) == "co:3") continue;  // always-treated controls carry ongoing effects
      Vector o;
      try {
        o = comparator(m, p).obs_weights;
      } catch (const DegenerateDesignError&) {
        continue;
      }
      CHECK(o.dot(flat) == doctest::Approx(theta(0)));
    }
  }
}

TEST_CASE("crossover 2 reduces to crossover 1 with balanced groups") {
  const auto p = AdoptionPattern::from_times(5, {2, 2, 3, 3, 4, 4, 6, 6});
  const auto sym = AdoptionPattern::from_times(3, {2, 3});
  CHECK((co_weights(sym, 2).obs_weights - co_weights(sym, 1).obs_weights).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((co_weights(p, 2).obs_weights - co_weights(p, 1).obs_weights).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("dynamic aggregation gives every exposure bucket the same total") {
  const auto p = oracle::stepped_wedge();
  const auto c = cs_weights(p, CsAggregation::Dynamic);
  REQUIRE(c.warnings.size() == 1);
  CHECK(c.warnings[0].find("(g=2,t=8)") != std::string::npos);
  const auto prof = expectation_profile(*c.did_weights, Setting::S2, p);
  std::map<int, double> bucket;
  for (Index k = 0; k < prof.catalog.size(); ++k) bucket[prof.catalog.keys[k].exposure] += prof.coefficients(k);
  CHECK(bucket[7] == doctest::Approx(0.0));
  for (int a = 1; a <= 6; ++a) CHECK(bucket[a] == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("last-cohort comparisons stop before the cohort adopts") {
  const auto p = oracle::stepped_wedge();
  const auto c = sa_weights(p);
  const DidSystem sys(p);
  for (Index r = 0; r < sys.n_rows(); ++r) {
    if ((*c.did_weights)(r) == 0.0) continue;
    const auto d = sys.index(r);
    CHECK(d.j_prime < 8);
    CHECK(p.adoption(d.i_prime) == 8);
  }
  CHECK(c.obs_weights.segment(0, 8)(7) == 0.0);
}

TEST_CASE("errors") {
  CHECK_THROWS_AS(comparator("bacon", oracle::toy()), ConfigError);
  CHECK_THROWS_AS(comparator("co:4", oracle::toy()), ConfigError);
  CHECK_THROWS_AS(tw_weights(AdoptionPattern::from_times(3, {3, 2})), IndexError);
  CHECK_THROWS_AS(sa_weights(AdoptionPattern::from_times(3, {2, 2})), DegenerateDesignError);
  CHECK_THROWS_AS(np_weights(AdoptionPattern::from_times(3, {2, 2}), NpWeighting::Equal), DegenerateDesignError);
}

}
