#include "gendid/panel.hpp"

#include "gendid/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

namespace gendid {

AdoptionPattern::AdoptionPattern(int n_periods, const std::vector<std::optional<int>>& adoption)
    : n_periods_(n_periods) {
  if (n_periods < 1) throw PeriodIndexError("number of periods must be positive");
  if (adoption.empty()) throw BalancedPanelError("pattern has no units");
  adoption_.reserve(adoption.size());
  for (std::size_t i = 0; i < adoption.size(); ++i) {
    if (!adoption[i]) {
      adoption_.push_back(n_periods + 1);
      continue;
    }
    const int t = *adoption[i];
    if (t <= 1)
      throw AdoptionAtStartError("unit " + std::to_string(i + 1) + " adopts in period " +
                                 std::to_string(t) + "; at least one untreated period is required");
    if (t > n_periods)
      throw PeriodIndexError("unit " + std::to_string(i + 1) + " adopts in period " +
                             std::to_string(t) + " beyond J=" + std::to_string(n_periods) +
                             "; use never-treated instead");
    adoption_.push_back(t);
  }
}

AdoptionPattern AdoptionPattern::from_times(int n_periods, const std::vector<int>& times) {
  std::vector<std::optional<int>> adoption;
  adoption.reserve(times.size());
  for (int t : times) adoption.push_back(t > n_periods ? std::nullopt : std::optional<int>(t));
  return AdoptionPattern(n_periods, adoption);
}

IntMatrix AdoptionPattern::indicator() const {
  IntMatrix x(n_units(), n_periods_);
  for (int i = 1; i <= n_units(); ++i)
    for (int j = 1; j <= n_periods_; ++j) x(i - 1, j - 1) = treated(i, j) ? 1 : 0;
  return x;
}

bool AdoptionPattern::is_canonical() const {
  return std::is_sorted(adoption_.begin(), adoption_.end());
}

bool AdoptionPattern::has_treated_cell() const {
  return std::any_of(adoption_.begin(), adoption_.end(), [&](int t) { return t <= n_periods_; });
}

int AdoptionPattern::distinct_adoption_times() const {
  return static_cast<int>(std::set<int>(adoption_.begin(), adoption_.end()).size());
}

std::string to_string(Transform t) {
  switch (t) {
    case Transform::Identity: return "identity";
    case Transform::Log: return "log";
    case Transform::Logit: return "logit";
  }
  return "identity";
}

Transform parse_transform(const std::string& s) {
  if (s == "identity" || s == "none") return Transform::Identity;
  if (s == "log") return Transform::Log;
  if (s == "logit") return Transform::Logit;
  throw ConfigError("unknown transform '" + s + "' (expected identity|log|logit)");
}

Vector PanelData::y() const {
  Vector y(outcomes.size());
  const Index J = outcomes.cols();
  for (Index i = 0; i < outcomes.rows(); ++i)
    for (Index j = 0; j < J; ++j) y(i * J + j) = outcomes(i, j);
  return y;
}

Matrix apply_transform(const Matrix& raw, Transform t) {
  if (t == Transform::Identity) return raw;
  Matrix out(raw.rows(), raw.cols());
  for (Index i = 0; i < raw.rows(); ++i) {
    for (Index j = 0; j < raw.cols(); ++j) {
      const double x = raw(i, j);
      if (t == Transform::Log) {
        if (!(x > 0.0))
          throw TransformDomainError("log transform needs positive outcomes; got " +
                                     csv::format_number(x) + " at unit row " +
                                     std::to_string(i + 1) + ", period " + std::to_string(j + 1));
        out(i, j) = std::log(x);
      } else {
        if (!(x > 0.0 && x < 1.0))
          throw TransformDomainError("logit transform needs outcomes in (0,1); got " +
                                     csv::format_number(x) + " at unit row " +
                                     std::to_string(i + 1) + ", period " + std::to_string(j + 1));
        out(i, j) = std::log(x / (1.0 - x));
      }
    }
  }
  return out;
}

PanelData canonical_order(const PanelData& panel) {
  const int n = panel.n_units();
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  const auto& times = panel.pattern.adoption_times();
  std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) { return times[a] < times[b]; });

  PanelData out;
  std::vector<int> sorted_times(n);
  out.outcomes.resize(panel.outcomes.rows(), panel.outcomes.cols());
  out.unit_labels.resize(n);
  out.order.resize(n);
  for (int r = 0; r < n; ++r) {
    const int src = perm[r];
    sorted_times[r] = times[src];
    out.outcomes.row(r) = panel.outcomes.row(src);
    out.unit_labels[r] = src < static_cast<int>(panel.unit_labels.size()) ? panel.unit_labels[src]
                                                                           : std::to_string(src + 1);
    out.order[r] = src < static_cast<int>(panel.order.size()) ? panel.order[src] : src;
  }
  out.pattern = AdoptionPattern::from_times(panel.n_periods(), sorted_times);
  out.period_labels = panel.period_labels;
  out.transform = panel.transform;
  return out;
}

PanelData make_panel(AdoptionPattern pattern, Matrix outcomes, std::vector<std::string> unit_labels,
                     Transform transform) {
  if (outcomes.rows() != pattern.n_units() || outcomes.cols() != pattern.n_periods())
    throw DimensionError("outcomes are " + std::to_string(outcomes.rows()) + "x" +
                         std::to_string(outcomes.cols()) + " but the pattern is " +
                         std::to_string(pattern.n_units()) + "x" +
                         std::to_string(pattern.n_periods()));
  if (!outcomes.allFinite()) throw BalancedPanelError("outcomes contain missing or non-finite cells");
  PanelData p;
  p.pattern = std::move(pattern);
  p.outcomes = apply_transform(outcomes, transform);
  p.transform = transform;
  p.unit_labels = std::move(unit_labels);
  if (p.unit_labels.empty())
    for (int i = 1; i <= p.n_units(); ++i) p.unit_labels.push_back(std::to_string(i));
  if (static_cast<int>(p.unit_labels.size()) != p.n_units())
    throw DimensionError("unit label count does not match the number of units");
  for (int j = 1; j <= p.n_periods(); ++j) p.period_labels.push_back(std::to_string(j));
  p.order.resize(p.n_units());
  std::iota(p.order.begin(), p.order.end(), 0);
  return canonical_order(p);
}

namespace {

bool is_never_token(const std::string& s) {
  std::string lower;
  for (char c : s) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return lower.empty() || lower == "never" || lower == "na" || lower == "inf" || lower == "none";
}

std::size_t column_of(const csv::Row& header, const std::string& name) {
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == name) return c;
  throw ParseError("missing column '" + name + "'");
}

// Maps raw period numbers to 1..J; they must be contiguous integers.
std::map<int, int> reindex_periods(const std::set<int>& raw) {
  if (raw.empty()) throw PeriodIndexError("no periods found");
  const int lo = *raw.begin();
  const int hi = *raw.rbegin();
  if (hi - lo + 1 != static_cast<int>(raw.size())) {
    for (int p = lo; p <= hi; ++p)
      if (!raw.count(p))
        throw PeriodIndexError("periods are not contiguous: " + std::to_string(p) +
                               " is missing between " + std::to_string(lo) + " and " +
                               std::to_string(hi));
  }
  std::map<int, int> idx;
  int k = 1;
  for (int p : raw) idx[p] = k++;
  return idx;
}

std::optional<int> reindex_adoption(const std::string& cell, int first_period, int n_periods,
                                    const std::string& unit) {
  if (is_never_token(cell)) return std::nullopt;
  const int raw = csv::parse_int(cell, "adoption_period of unit " + unit);
  const int t = raw - first_period + 1;
  if (t > n_periods) return std::nullopt;  // adopts after the observation window
  if (t <= 1)
    throw AdoptionAtStartError("unit " + unit + " is treated from the first observed period");
  return t;
}

PanelData finish(std::vector<std::string> labels, std::vector<std::optional<int>> adoption,
                 Matrix raw, std::vector<std::string> period_labels, Transform transform) {
  PanelData p;
  p.pattern = AdoptionPattern(static_cast<int>(raw.cols()), adoption);
  p.outcomes = apply_transform(raw, transform);
  p.transform = transform;
  p.unit_labels = std::move(labels);
  p.period_labels = std::move(period_labels);
  p.order.resize(p.n_units());
  std::iota(p.order.begin(), p.order.end(), 0);
  return canonical_order(p);
}

PanelData load_long(const std::vector<csv::Row>& rows, Transform transform) {
  const auto& header = rows.front();
  const auto c_unit = column_of(header, "unit");
  const auto c_period = column_of(header, "period");
  const auto c_outcome = column_of(header, "outcome");
  const auto c_adopt = column_of(header, "adoption_period");

  std::vector<std::string> labels;
  std::unordered_map<std::string, int> unit_index;
  std::vector<std::string> adopt_cell;
  std::set<int> periods;
  struct Cell {
    int unit;
    int period;
    std::string outcome;
  };
  std::vector<Cell> cells;

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = "line " + std::to_string(r + 1);
    if (row.size() != header.size())
      throw ParseError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                       std::to_string(row.size()));
    const std::string& unit = row[c_unit];
    if (unit.empty()) throw ParseError(where + ": empty unit");
    auto [it, inserted] = unit_index.emplace(unit, static_cast<int>(labels.size()));
    if (inserted) {
      labels.push_back(unit);
      adopt_cell.push_back(row[c_adopt]);
    } else if (adopt_cell[it->second] != row[c_adopt]) {
      throw ParseError(where + ": unit " + unit + " has inconsistent adoption_period");
    }
    if (row[c_period].empty()) throw BalancedPanelError(where + ": missing period");
    const int period = csv::parse_int(row[c_period], where + " period");
    periods.insert(period);
    cells.push_back({it->second, period, row[c_outcome]});
  }
  if (labels.empty()) throw BalancedPanelError("no data rows");

  const auto pidx = reindex_periods(periods);
  const int N = static_cast<int>(labels.size());
  const int J = static_cast<int>(pidx.size());
  Matrix raw = Matrix::Constant(N, J, std::nan(""));
  for (const auto& c : cells) {
    const int j = pidx.at(c.period) - 1;
    if (!std::isnan(raw(c.unit, j)))
      throw ParseError("duplicate record for unit " + labels[c.unit] + ", period " +
                       std::to_string(c.period));
    if (c.outcome.empty() || c.outcome == "NA")
      throw BalancedPanelError("missing outcome for unit " + labels[c.unit] + ", period " +
                               std::to_string(c.period));
    raw(c.unit, j) = csv::parse_double(c.outcome, "outcome of unit " + labels[c.unit]);
  }
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < J; ++j)
      if (std::isnan(raw(i, j)))
        throw BalancedPanelError("unit " + labels[i] + " has no record for period " +
                                 std::to_string(*periods.begin() + j));

  std::vector<std::optional<int>> adoption;
  for (int i = 0; i < N; ++i)
    adoption.push_back(reindex_adoption(adopt_cell[i], *periods.begin(), J, labels[i]));
  std::vector<std::string> period_labels;
  for (int p : periods) period_labels.push_back(std::to_string(p));
  return finish(std::move(labels), std::move(adoption), std::move(raw), std::move(period_labels),
                transform);
}

PanelData load_wide(const std::vector<csv::Row>& rows, Transform transform) {
  const auto& header = rows.front();
  const auto c_unit = column_of(header, "unit");
  const auto c_adopt = column_of(header, "adoption_period");
  std::map<int, std::size_t> period_col;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& h = header[c];
    if (h.size() > 1 && (h[0] == 'y' || h[0] == 'Y')) {
      const int p = csv::parse_int(h.substr(1), "wide header '" + h + "'");
      if (!period_col.emplace(p, c).second) throw ParseError("duplicate column '" + h + "'");
    }
  }
  std::set<int> periods;
  for (const auto& [p, c] : period_col) periods.insert(p);
  const auto pidx = reindex_periods(periods);
  const int J = static_cast<int>(pidx.size());

  std::vector<std::string> labels;
  std::set<std::string> seen;
  std::vector<std::optional<int>> adoption;
  Matrix raw(static_cast<Index>(rows.size() - 1), J);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = "line " + std::to_string(r + 1);
    if (row.size() != header.size())
      throw BalancedPanelError(where + ": expected " + std::to_string(header.size()) +
                               " fields, got " + std::to_string(row.size()));
    const std::string& unit = row[c_unit];
    if (!seen.insert(unit).second) throw ParseError(where + ": duplicate unit " + unit);
    labels.push_back(unit);
    for (const auto& [p, c] : period_col) {
      if (row[c].empty() || row[c] == "NA")
        throw BalancedPanelError("missing outcome for unit " + unit + ", period " +
                                 std::to_string(p));
      raw(static_cast<Index>(r - 1), pidx.at(p) - 1) =
          csv::parse_double(row[c], "outcome of unit " + unit);
    }
    adoption.push_back(reindex_adoption(row[c_adopt], *periods.begin(), J, unit));
  }
  if (labels.empty()) throw BalancedPanelError("no data rows");
  std::vector<std::string> period_labels;
  for (int p : periods) period_labels.push_back(std::to_string(p));
  return finish(std::move(labels), std::move(adoption), std::move(raw), std::move(period_labels),
                transform);
}

}  // namespace

PanelData load_panel(std::istream& in, PanelFormat format, Transform transform) {
  const auto rows = csv::read_all(in);
  if (rows.empty()) throw ParseError("panel input is empty");
  return format == PanelFormat::Long ? load_long(rows, transform) : load_wide(rows, transform);
}

PanelData load_panel_file(const std::string& path, PanelFormat format, Transform transform) {
  if (path == "-") return load_panel(std::cin, format, transform);
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open panel file '" + path + "'");
  return load_panel(in, format, transform);
}

}  // namespace gendid
