#include "doctest.h"
#include "oracle.hpp"

#include "gendid/simulate.hpp"

using namespace gendid;

namespace {

bool setting_holds(Setting s, Heterogeneity h) {
  switch (h) {
    case Heterogeneity::Homogeneous: return true;
    case Heterogeneity::Calendar: return s == Setting::S4 || s == Setting::S2 || s == Setting::S1;
    case Heterogeneity::Exposure: return s == Setting::S3 || s == Setting::S2 || s == Setting::S1;
  }
  return false;
}

}  // namespace

TEST_SUITE("simulate") {

TEST_CASE("built-in scenarios") {
  for (int id = 1; id <= 9; ++id) {
    const auto s = builtin_scenario(id);
    CHECK_NOTHROW(s.validate());
    CHECK(s.pattern() == oracle::stepped_wedge());
  }
  CHECK_THROWS_AS(builtin_scenario(10), ConfigError);
  auto bad = builtin_scenario(4);
  bad.theta.pop_back();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(parse_heterogeneity("exposure") == Heterogeneity::Exposure);
}

TEST_CASE("targets") {
  CHECK(target_value(registry_entry("O1"), builtin_scenario(2)) == doctest::Approx(-0.02));
  CHECK(target_value(registry_entry("O10"), builtin_scenario(7)) == doctest::Approx(-0.025));
  CHECK(target_value(registry_entry("O5"), builtin_scenario(4)) == doctest::Approx(-0.02));
  CHECK(target_value(registry_entry("P9"), builtin_scenario(9)) == doctest::Approx(-0.07));
  CHECK(target_value(registry_entry("P1"), builtin_scenario(5)) == doctest::Approx(-0.06));
}

TEST_CASE("default entries skip mismatched targets and mixed models") {
  for (int id : {1, 4, 7}) {
    const auto s = builtin_scenario(id);
    for (const auto& e : default_entries(s)) {
      const auto& r = registry_entry(e);
      CHECK(r.kind != EstimatorKind::ME);
      if (s.heterogeneity == Heterogeneity::Calendar) CHECK(r.target_setting != Setting::S3);
      if (s.heterogeneity == Heterogeneity::Exposure) CHECK(r.target_setting != Setting::S4);
    }
  }
  StudyOptions o;
  o.n_sims = 2;
  o.n_perm = 2;
  o.entries = {"O3"};
  CHECK_THROWS_AS(run_study({builtin_scenario(1)}, o), UnsupportedEstimatorError);
}

TEST_CASE("noiseless data recover the targets exactly") {
  StudyOptions o;
  o.n_sims = 3;
  o.n_perm = 5;
  o.analytic = true;
  for (int id : {2, 5, 9}) {
    auto s = builtin_scenario(id);
    s.sigma_e = 0;
    s.sigma_nu = 0;
    for (const auto& row : run_study({s}, o)) {
      const auto& e = registry_entry(row.entry);
      if (e.kind != EstimatorKind::GD || !setting_holds(e.setting, s.heterogeneity)) continue;
      CAPTURE(id);
      CAPTURE(row.entry);
      CHECK(row.mean == doctest::Approx(row.truth).epsilon(1e-9).scale(1));
      CHECK(row.sd < 1e-10);
    }
  }
}

TEST_CASE("studies do not depend on the worker count") {
  StudyOptions o;
  o.n_sims = 7;
  o.n_perm = 19;
  o.entries = {"O1", "O2", "O13", "P9"};
  const auto one = run_study({builtin_scenario(3)}, o);
  o.workers = 3;
  const auto three = run_study({builtin_scenario(3)}, o);
  REQUIRE(one.size() == three.size());
  for (std::size_t k = 0; k < one.size(); ++k) {
    CHECK(one[k].mean == three[k].mean);
    CHECK(one[k].sd == three[k].sd);
    CHECK(one[k].power == three[k].power);
  }
}

TEST_CASE("cell means have the model variance") {
  auto s = builtin_scenario(1);
  std::fill(s.cluster_pool.begin(), s.cluster_pool.end(), 0.0);
  const double expect = s.sigma_nu * s.sigma_nu + s.sigma_e * s.sigma_e / s.n_per_cell;
  for (bool analytic : {false, true}) {
    double ss = 0;
    long n = 0;
    for (std::uint64_t r = 0; r < 80; ++r) {
      const auto panel = generate_swt(s, r, analytic);
      for (Index i = 0; i < panel.outcomes.rows(); ++i)
        for (Index j = 0; j < panel.outcomes.cols(); ++j) {
          const double d = panel.outcomes(i, j) - s.mu - s.b[static_cast<std::size_t>(j)];
          ss += d * d;
          ++n;
        }
    }
    CAPTURE(analytic);
    CHECK(ss / n == doctest::Approx(expect).epsilon(0.05));
  }
}

TEST_CASE("replicates are reproducible from the seed") {
  const auto s = builtin_scenario(2);
  CHECK(generate_swt(s, 99).outcomes == generate_swt(s, 99).outcomes);
  CHECK(generate_swt(s, 99).outcomes != generate_swt(s, 100).outcomes);
}

}
