#pragma once

#include "gendid/didmat.hpp"
#include "gendid/panel.hpp"

#include <compare>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace gendid {

// Treatment-effect heterogeneity regimes, finest (S1) to coarsest (S5).
//   S1: effects vary by unit, calendar period and exposure time
//   S2: by calendar period and exposure time
//   S3: by exposure time only
//   S4: by calendar period only
//   S5: one homogeneous effect
enum class Setting { S1 = 1, S2, S3, S4, S5 };

std::string to_string(Setting s);
Setting parse_setting(const std::string& s);

// Unique effect label. Dimensions the setting does not key on are held at 0.
struct EffectKey {
  int unit = 0;      // i (S1 only)
  int period = 0;    // calendar period j (S1, S2, S4)
  int exposure = 0;  // exposure time a = j - T_i + 1 (S1, S2, S3)

  auto operator<=>(const EffectKey&) const = default;
  bool operator==(const EffectKey&) const = default;
};

std::string to_string(const EffectKey& k, Setting s);

// Key of the effect acting on treated cell (unit, period), both 1-based.
EffectKey key_for_cell(Setting s, const AdoptionPattern& pattern, int unit, int period);

struct ThetaCatalog {
  Setting setting = Setting::S5;
  std::vector<EffectKey> keys;   // ordered by (unit, period, exposure)
  std::vector<bool> identifiable;  // the single effect is estimable

  Index size() const { return static_cast<Index>(keys.size()); }
  // Position of `key`, or -1.
  Index find(const EffectKey& key) const;
};

struct FMatrix {
  Matrix matrix;  // C(N,2)C(J,2) x |theta|, E[d] = F theta
  ThetaCatalog catalog;
};

ThetaCatalog enumerate_theta(Setting setting, const AdoptionPattern& pattern);
FMatrix build_f(Setting setting, const AdoptionPattern& pattern);

struct EstimandSpec {
  std::vector<std::pair<EffectKey, double>> terms;
  Vector v;
  std::string label;
};

// Explicit linear combination; repeated keys accumulate.
EstimandSpec estimand(const std::vector<std::pair<EffectKey, double>>& terms,
                      const ThetaCatalog& catalog, std::string label = {});

// Inclusive range filter on key dimensions.
struct KeyFilter {
  using Range = std::pair<int, int>;
  static constexpr Range kAll{std::numeric_limits<int>::min(), std::numeric_limits<int>::max()};

  Range unit = kAll;
  Range period = kAll;
  Range exposure = kAll;
  Range group = kAll;  // adoption period j - a + 1

  bool matches(const EffectKey& k, Setting s) const;
};

namespace estimands {

EstimandSpec single(const EffectKey& key, const ThetaCatalog& catalog);
EstimandSpec contrast(const EffectKey& a, const EffectKey& b, const ThetaCatalog& catalog);
// Equal weight on the given keys.
EstimandSpec average(const std::vector<EffectKey>& keys, const ThetaCatalog& catalog);
// Equal weight on every identifiable key passing `filter`.
EstimandSpec flat_average(const KeyFilter& filter, const ThetaCatalog& catalog);
// Average identifiable keys within each exposure time in [lo, hi], then
// equally across exposure times.
EstimandSpec exposure_average(int lo, int hi, const ThetaCatalog& catalog);
// Same, bucketed by calendar period.
EstimandSpec calendar_average(int lo, int hi, const ThetaCatalog& catalog);
// Same, bucketed by adoption group g = j - a + 1 (S1/S2 only).
EstimandSpec group_average(int lo, int hi, const ThetaCatalog& catalog);
// All identifiable treated effects equally.
EstimandSpec attw(const ThetaCatalog& catalog);

}  // namespace estimands

// Mini-language:
//   single:j=4,a=2          one effect (fields per setting: i,j,a)
//   avg:a=1..7 | avg:j=2..7 | avg:g=2..7   bucketed average over one dimension
//   mean:a=1..4,g=..26      flat average over identifiable keys matching filters
//   attw                    all identifiable effects equally
//   group                   group (adoption cohort) average
//   contrast:(j=4,a=2)-(j=4,a=1)
//   (j=4,a=2)=0.5;(j=3,a=1)=0.5   explicit coefficients
EstimandSpec parse_estimand(const std::string& expr, const ThetaCatalog& catalog);

// Coefficients F^T w: the combination of effects a DID-weighted estimator
// targets if `setting` holds.
struct ExpectationProfile {
  ThetaCatalog catalog;
  Vector coefficients;
};
ExpectationProfile expectation_profile(const Vector& w, Setting setting,
                                       const AdoptionPattern& pattern);

}  // namespace gendid
