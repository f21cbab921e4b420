#pragma once

#include "gendid/didmat.hpp"
#include "gendid/panel.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gendid {

enum class CsAggregation { Simple, Dynamic, Group, Calendar };
enum class NpWeighting { Equal, TreatedProp, InvVar };

// An existing estimator written as weights. did_weights follows the row order
// of A and is absent for the purely vertical NP estimator and for TW, which is
// defined through its observation weights.
struct ComparatorSpec {
  std::string method;
  std::optional<Vector> did_weights;
  Vector obs_weights;  // unit-major, length NJ
  std::vector<std::string> warnings;
};

// Two-way fixed effects: residualized treatment indicator over its sum of squares.
ComparatorSpec tw_weights(const AdoptionPattern& pattern);
// Clean comparisons against not-yet-treated controls, aggregated into
// group-time effects and then per `agg`.
ComparatorSpec cs_weights(const AdoptionPattern& pattern, CsAggregation agg);
// Comparisons against the last-adopting cohort only.
ComparatorSpec sa_weights(const AdoptionPattern& pattern);
// One-period-ahead switches against not-yet-treated units.
ComparatorSpec ch_weights(const AdoptionPattern& pattern);
// Crossover estimators; variant 1 equal, 2 harmonic-mean, 3 with always-treated controls.
ComparatorSpec co_weights(const AdoptionPattern& pattern, int variant);
// Within-period treated-minus-untreated contrasts.
ComparatorSpec np_weights(const AdoptionPattern& pattern, NpWeighting weighting);

// "tw", "cs:simple|dynamic|group|calendar", "sa", "ch", "co:1|2|3",
// "np:equal|treated_prop|inv_var".
ComparatorSpec comparator(const std::string& method, const AdoptionPattern& pattern);

// A^T w without forming A.
Vector did_to_obs(const Vector& did_weights, int n_units, int n_periods);

}  // namespace gendid
