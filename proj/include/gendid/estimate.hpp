#pragma once

#include "gendid/panel.hpp"
#include "gendid/solver.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gendid {

enum class Sided { Two, Left, Right };

std::string to_string(Sided s);
Sided parse_sided(const std::string& s);

struct EstimateResult {
  double point = 0.0;  // on the transformed scale
  std::optional<double> back_transformed;
  std::optional<double> perm_p;
  int n_perm = 0;
  std::vector<double> null_draws;
  std::optional<double> plug_in_var;
  std::uint64_t seed = 0;
};

// o . y with y unit-major.
double point_estimate(const Vector& obs_weights, const PanelData& panel);
double point_estimate(const WeightSolution& sol, const PanelData& panel);

struct PermutationOptions {
  int n_perm = 1000;
  std::uint64_t seed = 42;
  Sided sided = Sided::Two;
  int workers = 1;
  bool keep_draws = false;
};

// Randomization test: outcome rows are permuted against the fixed weights.
// p = (1 + #{|perm| >= |obs|}) / (n_perm + 1) for the two-sided test.
EstimateResult permutation_test(const Vector& obs_weights, const PanelData& panel,
                                const PermutationOptions& opts);
EstimateResult permutation_test(const WeightSolution& sol, const PanelData& panel,
                                const PermutationOptions& opts);

// Counts permuted statistics at least as extreme as `observed`; exposed so
// callers can test against precomputed draws.
double permutation_p_value(double observed, const std::vector<double>& draws, Sided sided,
                           double tol);

// o^T V o for a user-supplied covariance of y.
double plug_in_variance(const Vector& obs_weights, const Matrix& vhat);

// exp(point) under log/logit, the point itself otherwise.
double back_transform(double point, Transform t);

}  // namespace gendid
