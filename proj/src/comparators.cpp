#include "gendid/comparators.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace gendid {

Vector did_to_obs(const Vector& did_weights, int n_units, int n_periods) {
  if (did_weights.size() != did_count(n_units, n_periods))
    throw DimensionError("DID weight vector has length " + std::to_string(did_weights.size()) +
                         ", expected " + std::to_string(did_count(n_units, n_periods)));
  Vector o = Vector::Zero(static_cast<Index>(n_units) * n_periods);
  for_each_did(n_units, n_periods, [&](std::int64_t r, const DidIndex& d) {
    const double w = did_weights(r);
    if (w == 0.0) return;
    const auto t = row_terms(d, n_periods);
    for (int k = 0; k < 4; ++k) o(t.col[k]) += t.sign[k] * w;
  });
  return o;
}

namespace {

void require_canonical(const AdoptionPattern& p) {
  if (!p.is_canonical()) throw IndexError("pattern must be canonically ordered");
}

class DidAccumulator {
 public:
  explicit DidAccumulator(const AdoptionPattern& p)
      : N_(p.n_units()), J_(p.n_periods()), w_(Vector::Zero(did_count(N_, J_))) {}

  // Adds `weight` * D_{a,b,j,j'}; the pair is stored with i < i', so reversed
  // units flip the sign.
  void add(int a, int b, int j, int jp, double weight) {
    if (a < b)
      w_(did_row_index({a, b, j, jp}, N_, J_) - 1) += weight;
    else
      w_(did_row_index({b, a, j, jp}, N_, J_) - 1) -= weight;
  }

  ComparatorSpec finish(std::string method) const {
    ComparatorSpec c;
    c.method = std::move(method);
    c.did_weights = w_;
    c.obs_weights = did_to_obs(w_, N_, J_);
    return c;
  }

 private:
  int N_, J_;
  Vector w_;
};

std::vector<int> units_where(const AdoptionPattern& p, auto pred) {
  std::vector<int> out;
  for (int i = 1; i <= p.n_units(); ++i)
    if (pred(p.adoption(i))) out.push_back(i);
  return out;
}

// Adoption times that fall inside the window, ascending.
std::vector<int> adoption_groups(const AdoptionPattern& p) {
  std::set<int> g;
  for (int t : p.adoption_times())
    if (t <= p.n_periods()) g.insert(t);
  return {g.begin(), g.end()};
}

}  // namespace

ComparatorSpec tw_weights(const AdoptionPattern& pattern) {
  require_canonical(pattern);
  const Matrix x = pattern.indicator().cast<double>();
  Matrix r = x.colwise() - x.rowwise().mean();
  r = r.rowwise() - x.colwise().mean();
  r.array() += x.mean();
  const double ss = r.squaredNorm();
  if (!(ss > 1e-12 * static_cast<double>(r.size())))
    throw DegenerateDesignError("treatment has no variation after removing unit and period effects");
  ComparatorSpec c;
  c.method = "tw";
  const Matrix rt = (r / ss).transpose();
  c.obs_weights = Eigen::Map<const Vector>(rt.data(), rt.size());
  return c;
}

ComparatorSpec cs_weights(const AdoptionPattern& pattern, CsAggregation agg) {
  require_canonical(pattern);
  const int J = pattern.n_periods();
  struct Cell {
    int g, t;
    std::vector<int> treated, controls;
  };
  std::vector<Cell> cells;
  std::vector<std::string> dropped;
  for (int g : adoption_groups(pattern))
    for (int t = g; t <= J; ++t) {
      Cell c{g, t, units_where(pattern, [&](int T) { return T == g; }),
             units_where(pattern, [&](int T) { return T > t; })};
      if (c.controls.empty())
        dropped.push_back("(g=" + std::to_string(g) + ",t=" + std::to_string(t) + ")");
      else
        cells.push_back(std::move(c));
    }
  if (cells.empty()) throw DegenerateDesignError("no group-time cell has a not-yet-treated control");

  // Bucket key per aggregation; within a bucket cells count by group size
  // (group: equally), buckets count equally (simple: a single bucket).
  auto bucket = [&](const Cell& c) {
    switch (agg) {
      case CsAggregation::Simple: return 0;
      case CsAggregation::Dynamic: return c.t - c.g + 1;
      case CsAggregation::Group: return c.g;
      case CsAggregation::Calendar: return c.t;
    }
    return 0;
  };
  auto mass = [&](const Cell& c) {
    return agg == CsAggregation::Group ? 1.0 : static_cast<double>(c.treated.size());
  };
  std::map<int, double> bucket_mass;
  for (const auto& c : cells) bucket_mass[bucket(c)] += mass(c);

  DidAccumulator acc(pattern);
  const double n_buckets = static_cast<double>(bucket_mass.size());
  for (const auto& c : cells) {
    const double cell_w = mass(c) / bucket_mass[bucket(c)] / n_buckets;
    const double pair_w = cell_w / static_cast<double>(c.treated.size() * c.controls.size());
    for (int i : c.treated)
      for (int ip : c.controls) acc.add(i, ip, c.g - 1, c.t, pair_w);
  }
  static const char* names[] = {"cs:simple", "cs:dynamic", "cs:group", "cs:calendar"};
  auto spec = acc.finish(names[static_cast<int>(agg)]);
  if (!dropped.empty()) {
    std::string msg = "dropped group-time cells without a clean control:";
    for (const auto& d : dropped) msg += " " + d;
    spec.warnings.push_back(msg);
  }
  return spec;
}

ComparatorSpec sa_weights(const AdoptionPattern& pattern) {
  require_canonical(pattern);
  const auto& times = pattern.adoption_times();
  const int last = *std::max_element(times.begin(), times.end());
  const int first = *std::min_element(times.begin(), times.end());
  if (last == first) throw DegenerateDesignError("no later-adopting control cohort exists");
  const auto cohort = units_where(pattern, [&](int T) { return T == last; });
  DidAccumulator acc(pattern);
  std::map<int, std::vector<int>> by_period;  // j' -> units compared at j'
  for (int i = 1; i <= pattern.n_units(); ++i) {
    const int T = pattern.adoption(i);
    if (T == last) continue;
    for (int jp = T; jp < last && jp <= pattern.n_periods(); ++jp) by_period[jp].push_back(i);
  }
  if (by_period.empty()) throw DegenerateDesignError("empty comparison set");
  const double n_periods = static_cast<double>(by_period.size());
  for (const auto& [jp, units] : by_period) {
    const double w = 1.0 / n_periods / static_cast<double>(units.size() * cohort.size());
    for (int i : units)
      for (int ip : cohort) acc.add(i, ip, pattern.adoption(i) - 1, jp, w);
  }
  return acc.finish("sa");
}

namespace {

struct SwitchGroup {
  int t;
  std::vector<int> switchers, controls;
};

// Timing groups with at least one eligible control; `always` admits units
// treated in both t-1 and t.
std::vector<SwitchGroup> switch_groups(const AdoptionPattern& p, bool always) {
  std::vector<SwitchGroup> out;
  for (int t : adoption_groups(p)) {
    SwitchGroup g{t, units_where(p, [&](int T) { return T == t; }),
                  units_where(p, [&](int T) { return T > t || (always && T < t); })};
    if (!g.controls.empty()) out.push_back(std::move(g));
  }
  if (out.empty()) throw DegenerateDesignError("no switching unit has an eligible control");
  return out;
}

}  // namespace

ComparatorSpec ch_weights(const AdoptionPattern& pattern) {
  require_canonical(pattern);
  const auto groups = switch_groups(pattern, false);
  DidAccumulator acc(pattern);
  for (const auto& g : groups) {
    const double w = 1.0 / static_cast<double>(groups.size() * g.switchers.size() * g.controls.size());
    for (int i : g.switchers)
      for (int ip : g.controls) acc.add(i, ip, g.t - 1, g.t, w);
  }
  return acc.finish("ch");
}

ComparatorSpec co_weights(const AdoptionPattern& pattern, int variant) {
  require_canonical(pattern);
  if (variant < 1 || variant > 3) throw ConfigError("crossover variant must be 1, 2 or 3");
  const auto groups = switch_groups(pattern, variant == 3);
  std::vector<double> gw;
  for (const auto& g : groups) {
    const double s = static_cast<double>(g.switchers.size());
    const double c = static_cast<double>(g.controls.size());
    gw.push_back(variant == 2 ? 2.0 * s * c / (s + c) : 1.0);
  }
  double total = 0.0;
  for (double x : gw) total += x;

  // Difference of mean first differences per group, built directly on cells.
  const int J = pattern.n_periods();
  DidAccumulator acc(pattern);
  Vector obs = Vector::Zero(static_cast<Index>(pattern.n_units()) * J);
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const auto& g = groups[k];
    const double w = gw[k] / total;
    const double ws = w / static_cast<double>(g.switchers.size());
    const double wc = w / static_cast<double>(g.controls.size());
    for (int i : g.switchers) {
      obs((i - 1) * J + g.t - 1) += ws;
      obs((i - 1) * J + g.t - 2) -= ws;
    }
    for (int ip : g.controls) {
      obs((ip - 1) * J + g.t - 1) -= wc;
      obs((ip - 1) * J + g.t - 2) += wc;
    }
    for (int i : g.switchers)
      for (int ip : g.controls) acc.add(i, ip, g.t - 1, g.t, ws / static_cast<double>(g.controls.size()));
  }
  auto spec = acc.finish("co:" + std::to_string(variant));
  spec.obs_weights = obs;
  return spec;
}

ComparatorSpec np_weights(const AdoptionPattern& pattern, NpWeighting weighting) {
  require_canonical(pattern);
  const int N = pattern.n_units();
  const int J = pattern.n_periods();
  std::vector<std::pair<int, double>> periods;  // (j, unnormalized weight)
  for (int j = 1; j <= J; ++j) {
    int n1 = 0;
    for (int i = 1; i <= N; ++i) n1 += pattern.treated(i, j);
    const int n0 = N - n1;
    if (n1 == 0 || n0 == 0) continue;
    double w = 1.0;
    if (weighting == NpWeighting::TreatedProp) w = n1;
    if (weighting == NpWeighting::InvVar) w = 1.0 / (1.0 / n1 + 1.0 / n0);
    periods.emplace_back(j, w);
  }
  if (periods.empty()) throw DegenerateDesignError("no period has both treated and untreated units");
  double total = 0.0;
  for (const auto& p : periods) total += p.second;
  ComparatorSpec c;
  static const char* names[] = {"np:equal", "np:treated_prop", "np:inv_var"};
  c.method = names[static_cast<int>(weighting)];
  c.obs_weights = Vector::Zero(static_cast<Index>(N) * J);
  for (const auto& [j, w] : periods) {
    int n1 = 0;
    for (int i = 1; i <= N; ++i) n1 += pattern.treated(i, j);
    const int n0 = N - n1;
    for (int i = 1; i <= N; ++i)
      c.obs_weights((i - 1) * J + j - 1) =
          w / total * (pattern.treated(i, j) ? 1.0 / n1 : -1.0 / n0);
  }
  return c;
}

ComparatorSpec comparator(const std::string& method, const AdoptionPattern& pattern) {
  const auto colon = method.find(':');
  const std::string name = method.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : method.substr(colon + 1);
  auto bad = [&]() {
    return ConfigError("unknown comparator '" + method +
                       "' (expected tw, cs:<simple|dynamic|group|calendar>, sa, ch, co:<1|2|3>, "
                       "np:<equal|treated_prop|inv_var>)");
  };
  if (name == "tw" && arg.empty()) return tw_weights(pattern);
  if (name == "sa" && arg.empty()) return sa_weights(pattern);
  if (name == "ch" && arg.empty()) return ch_weights(pattern);
  if (name == "cs") {
    if (arg == "simple" || arg.empty()) return cs_weights(pattern, CsAggregation::Simple);
    if (arg == "dynamic") return cs_weights(pattern, CsAggregation::Dynamic);
    if (arg == "group") return cs_weights(pattern, CsAggregation::Group);
    if (arg == "calendar") return cs_weights(pattern, CsAggregation::Calendar);
  }
  if (name == "co" && (arg == "1" || arg == "2" || arg == "3")) return co_weights(pattern, arg[0] - '0');
  if (name == "np") {
    if (arg == "equal" || arg.empty()) return np_weights(pattern, NpWeighting::Equal);
    if (arg == "treated_prop") return np_weights(pattern, NpWeighting::TreatedProp);
    if (arg == "inv_var") return np_weights(pattern, NpWeighting::InvVar);
  }
  throw bad();
}

}  // namespace gendid
