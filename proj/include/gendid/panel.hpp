#pragma once

#include "gendid/types.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gendid {

// Staggered adoption pattern. Periods and adoption times are 1-based; a
// never-treated unit is stored with adoption time J+1.
class AdoptionPattern {
 public:
  AdoptionPattern() = default;
  // `adoption[i]` is T_i in [2, J], or std::nullopt for never treated.
  AdoptionPattern(int n_periods, const std::vector<std::optional<int>>& adoption);

  // Convenience for designs given as raw T_i with J+1 (or larger) meaning never.
  static AdoptionPattern from_times(int n_periods, const std::vector<int>& times);

  int n_units() const { return static_cast<int>(adoption_.size()); }
  int n_periods() const { return n_periods_; }
  int never() const { return n_periods_ + 1; }

  // T_i for 1-based unit i.
  int adoption(int unit) const { return adoption_[unit - 1]; }
  const std::vector<int>& adoption_times() const { return adoption_; }
  bool never_treated(int unit) const { return adoption(unit) > n_periods_; }

  // X_ij with 1-based indices.
  bool treated(int unit, int period) const { return adoption(unit) <= period; }
  IntMatrix indicator() const;

  bool is_canonical() const;
  bool has_treated_cell() const;
  int distinct_adoption_times() const;

  bool operator==(const AdoptionPattern&) const = default;

 private:
  int n_periods_ = 0;
  std::vector<int> adoption_;
};

enum class Transform { Identity, Log, Logit };
enum class PanelFormat { Long, Wide };

std::string to_string(Transform t);
Transform parse_transform(const std::string& s);

struct PanelData {
  AdoptionPattern pattern;
  Matrix outcomes;                      // N x J, already transformed
  std::vector<std::string> unit_labels;  // in current row order
  std::vector<std::string> period_labels;
  Transform transform = Transform::Identity;
  // order[r] = position of row r in the ingested input.
  std::vector<int> order;

  int n_units() const { return pattern.n_units(); }
  int n_periods() const { return pattern.n_periods(); }

  // Outcomes flattened unit-major: y(i*J + j).
  Vector y() const;
};

// Builds a canonically ordered panel from in-memory outcomes.
PanelData make_panel(AdoptionPattern pattern, Matrix outcomes,
                     std::vector<std::string> unit_labels = {},
                     Transform transform = Transform::Identity);

// Stable sort of units by adoption time, never-treated last.
PanelData canonical_order(const PanelData& panel);

PanelData load_panel(std::istream& in, PanelFormat format,
                     Transform transform = Transform::Identity);
PanelData load_panel_file(const std::string& path, PanelFormat format,
                          Transform transform = Transform::Identity);

// Elementwise log / logit with domain checks.
Matrix apply_transform(const Matrix& raw, Transform t);

}  // namespace gendid
