#include "gendid/assumptions.hpp"

#include "gendid/csv.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <set>

namespace gendid {

std::string to_string(Setting s) { return "S" + std::to_string(static_cast<int>(s)); }

Setting parse_setting(const std::string& s) {
  if (s.size() == 2 && (s[0] == 'S' || s[0] == 's') && s[1] >= '1' && s[1] <= '5')
    return static_cast<Setting>(s[1] - '0');
  throw ConfigError("unknown setting '" + s + "' (expected S1..S5)");
}

std::string to_string(const EffectKey& k, Setting s) {
  switch (s) {
    case Setting::S1:
      return "i=" + std::to_string(k.unit) + ",j=" + std::to_string(k.period) +
             ",a=" + std::to_string(k.exposure);
    case Setting::S2:
      return "j=" + std::to_string(k.period) + ",a=" + std::to_string(k.exposure);
    case Setting::S3: return "a=" + std::to_string(k.exposure);
    case Setting::S4: return "j=" + std::to_string(k.period);
    case Setting::S5: return "theta";
  }
  return {};
}

EffectKey key_for_cell(Setting s, const AdoptionPattern& pattern, int unit, int period) {
  const int a = period - pattern.adoption(unit) + 1;
  switch (s) {
    case Setting::S1: return {unit, period, a};
    case Setting::S2: return {0, period, a};
    case Setting::S3: return {0, 0, a};
    case Setting::S4: return {0, period, 0};
    case Setting::S5: return {};
  }
  return {};
}

Index ThetaCatalog::find(const EffectKey& key) const {
  const auto it = std::lower_bound(keys.begin(), keys.end(), key);
  if (it == keys.end() || !(*it == key)) return -1;
  return static_cast<Index>(it - keys.begin());
}

namespace {

ThetaCatalog catalog_keys(Setting setting, const AdoptionPattern& pattern) {
  if (!pattern.has_treated_cell()) throw NoTreatmentError("no unit is ever treated");
  std::set<EffectKey> keys;
  for (int i = 1; i <= pattern.n_units(); ++i)
    for (int j = pattern.adoption(i); j <= pattern.n_periods(); ++j)
      keys.insert(key_for_cell(setting, pattern, i, j));
  ThetaCatalog c;
  c.setting = setting;
  c.keys.assign(keys.begin(), keys.end());
  c.identifiable.assign(c.keys.size(), false);
  return c;
}

}  // namespace

FMatrix build_f(Setting setting, const AdoptionPattern& pattern) {
  if (!pattern.is_canonical()) throw IndexError("pattern must be canonically ordered");
  FMatrix f;
  f.catalog = catalog_keys(setting, pattern);
  const int N = pattern.n_units();
  const int J = pattern.n_periods();
  f.matrix = Matrix::Zero(static_cast<Index>(did_count(N, J)), f.catalog.size());

  auto add = [&](std::int64_t row, int unit, int period, double sign) {
    const Index col = f.catalog.find(key_for_cell(setting, pattern, unit, period));
    f.matrix(row, col) += sign;
  };
  for_each_did(N, J, [&](std::int64_t r, const DidIndex& d) {
    // Expected values by comparison type; the first unit's later-period effect
    // enters positively, matching the sign convention of D.
    switch (classify_did(d, pattern)) {
      case 1: break;
      case 2: add(r, d.i, d.j_prime, 1); break;
      case 3:
        add(r, d.i, d.j_prime, 1);
        add(r, d.i, d.j, -1);
        break;
      case 4:
        add(r, d.i, d.j_prime, 1);
        add(r, d.i_prime, d.j_prime, -1);
        break;
      case 5:
        add(r, d.i, d.j_prime, 1);
        add(r, d.i, d.j, -1);
        add(r, d.i_prime, d.j_prime, -1);
        break;
      case 6:
        add(r, d.i, d.j_prime, 1);
        add(r, d.i, d.j, -1);
        add(r, d.i_prime, d.j_prime, -1);
        add(r, d.i_prime, d.j, 1);
        break;
    }
  });
  // A key is identifiable when its unit vector lies in the row space of F,
  // i.e. the single effect has an unbiased DID-weighted estimator.
  Eigen::BDCSVD<Matrix> svd(f.matrix, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  Index rank = 0;
  if (sv.size() > 0 && sv(0) > 0.0) {
    const double tol = 1e-10 * sv(0) * static_cast<double>(std::max(f.matrix.rows(), f.matrix.cols()));
    rank = (sv.array() > tol).count();
  }
  const Matrix row_space = svd.matrixV().leftCols(rank);
  for (Index c = 0; c < f.catalog.size(); ++c)
    f.catalog.identifiable[c] = row_space.row(c).squaredNorm() > 1.0 - 1e-8;
  return f;
}

ThetaCatalog enumerate_theta(Setting setting, const AdoptionPattern& pattern) {
  return build_f(setting, pattern).catalog;
}

EstimandSpec estimand(const std::vector<std::pair<EffectKey, double>>& terms,
                      const ThetaCatalog& catalog, std::string label) {
  if (terms.empty()) throw EmptyEstimandError("estimand has no terms");
  EstimandSpec e;
  e.terms = terms;
  e.label = std::move(label);
  e.v = Vector::Zero(catalog.size());
  for (const auto& [key, coeff] : terms) {
    const Index c = catalog.find(key);
    if (c < 0)
      throw KeyError("effect (" + to_string(key, catalog.setting) + ") does not occur under " +
                     to_string(catalog.setting) + " for this design");
    e.v(c) += coeff;
  }
  return e;
}

bool KeyFilter::matches(const EffectKey& k, Setting s) const {
  auto in = [](const Range& r, int x) { return r.first <= x && x <= r.second; };
  auto all = [](const Range& r) { return r == kAll; };
  const bool has_unit = s == Setting::S1;
  const bool has_period = s == Setting::S1 || s == Setting::S2 || s == Setting::S4;
  const bool has_exposure = s == Setting::S1 || s == Setting::S2 || s == Setting::S3;
  const bool has_group = has_period && has_exposure;
  if (!all(unit) && !(has_unit && in(unit, k.unit))) return false;
  if (!all(period) && !(has_period && in(period, k.period))) return false;
  if (!all(exposure) && !(has_exposure && in(exposure, k.exposure))) return false;
  if (!all(group) && !(has_group && in(group, k.period - k.exposure + 1))) return false;
  return true;
}

namespace estimands {

namespace {

std::string range_label(const char* dim, int lo, int hi) {
  return std::string(dim) + "=" + std::to_string(lo) + ".." + std::to_string(hi);
}

// Groups identifiable keys by `bucket(key)` within [lo, hi]; equal weight per
// bucket, split equally inside it.
template <typename BucketFn>
EstimandSpec bucketed(int lo, int hi, const ThetaCatalog& catalog, BucketFn bucket,
                      std::string label) {
  std::map<int, std::vector<EffectKey>> groups;
  for (Index c = 0; c < catalog.size(); ++c) {
    if (!catalog.identifiable[c]) continue;
    const int b = bucket(catalog.keys[c]);
    if (b >= lo && b <= hi) groups[b].push_back(catalog.keys[c]);
  }
  if (groups.empty())
    throw EmptyEstimandError("no identifiable effects in " + label + " under " +
                             to_string(catalog.setting));
  std::vector<std::pair<EffectKey, double>> terms;
  const double per_bucket = 1.0 / static_cast<double>(groups.size());
  for (const auto& [b, keys] : groups)
    for (const auto& k : keys) terms.emplace_back(k, per_bucket / static_cast<double>(keys.size()));
  return estimand(terms, catalog, std::move(label));
}

void require(bool ok, const ThetaCatalog& catalog, const char* what) {
  if (!ok)
    throw EstimandSyntaxError(std::string(what) + " is not defined under " +
                              to_string(catalog.setting));
}

}  // namespace

EstimandSpec single(const EffectKey& key, const ThetaCatalog& catalog) {
  return estimand({{key, 1.0}}, catalog, "single:" + to_string(key, catalog.setting));
}

EstimandSpec contrast(const EffectKey& a, const EffectKey& b, const ThetaCatalog& catalog) {
  return estimand({{a, 1.0}, {b, -1.0}}, catalog,
                  "contrast:(" + to_string(a, catalog.setting) + ")-(" +
                      to_string(b, catalog.setting) + ")");
}

EstimandSpec average(const std::vector<EffectKey>& keys, const ThetaCatalog& catalog) {
  if (keys.empty()) throw EmptyEstimandError("average over an empty key set");
  std::vector<std::pair<EffectKey, double>> terms;
  for (const auto& k : keys) terms.emplace_back(k, 1.0 / static_cast<double>(keys.size()));
  return estimand(terms, catalog, "average");
}

EstimandSpec flat_average(const KeyFilter& filter, const ThetaCatalog& catalog) {
  std::vector<EffectKey> keys;
  for (Index c = 0; c < catalog.size(); ++c)
    if (catalog.identifiable[c] && filter.matches(catalog.keys[c], catalog.setting))
      keys.push_back(catalog.keys[c]);
  if (keys.empty()) throw EmptyEstimandError("no identifiable effects match the filter");
  auto e = average(keys, catalog);
  e.label = "mean";
  return e;
}

EstimandSpec exposure_average(int lo, int hi, const ThetaCatalog& catalog) {
  const auto s = catalog.setting;
  require(s == Setting::S1 || s == Setting::S2 || s == Setting::S3, catalog, "exposure average");
  return bucketed(lo, hi, catalog, [](const EffectKey& k) { return k.exposure; },
                  "avg:" + range_label("a", lo, hi));
}

EstimandSpec calendar_average(int lo, int hi, const ThetaCatalog& catalog) {
  const auto s = catalog.setting;
  require(s == Setting::S1 || s == Setting::S2 || s == Setting::S4, catalog, "calendar average");
  return bucketed(lo, hi, catalog, [](const EffectKey& k) { return k.period; },
                  "avg:" + range_label("j", lo, hi));
}

EstimandSpec group_average(int lo, int hi, const ThetaCatalog& catalog) {
  const auto s = catalog.setting;
  require(s == Setting::S1 || s == Setting::S2, catalog, "group average");
  return bucketed(lo, hi, catalog,
                  [](const EffectKey& k) { return k.period - k.exposure + 1; },
                  "avg:" + range_label("g", lo, hi));
}

EstimandSpec attw(const ThetaCatalog& catalog) {
  auto e = flat_average(KeyFilter{}, catalog);
  e.label = "attw";
  return e;
}

}  // namespace estimands

namespace {

std::string strip(std::string s) {
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }),
          s.end());
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == sep && depth == 0) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

int to_int(const std::string& s, const std::string& expr) {
  try {
    return csv::parse_int(s, "estimand");
  } catch (const ParseError&) {
    throw EstimandSyntaxError("expected an integer in '" + expr + "', got '" + s + "'");
  }
}

// "3", "1..7", "..26", "2.."
KeyFilter::Range parse_range(const std::string& s, const std::string& expr) {
  const auto dots = s.find("..");
  if (dots == std::string::npos) {
    const int v = to_int(s, expr);
    return {v, v};
  }
  KeyFilter::Range r = KeyFilter::kAll;
  const auto lo = s.substr(0, dots);
  const auto hi = s.substr(dots + 2);
  if (!lo.empty()) r.first = to_int(lo, expr);
  if (!hi.empty()) r.second = to_int(hi, expr);
  return r;
}

std::map<char, std::string> parse_fields(const std::string& body, const std::string& expr) {
  std::map<char, std::string> fields;
  if (body.empty()) return fields;
  for (const auto& part : split(body, ',')) {
    const auto eq = part.find('=');
    if (eq != 1 || part.size() < 3)
      throw EstimandSyntaxError("expected field=value in '" + expr + "', got '" + part + "'");
    const char name = part[0];
    if (name != 'i' && name != 'j' && name != 'a' && name != 'g')
      throw EstimandSyntaxError("unknown field '" + std::string(1, name) + "' in '" + expr + "'");
    if (!fields.emplace(name, part.substr(2)).second)
      throw EstimandSyntaxError("field '" + std::string(1, name) + "' repeated in '" + expr + "'");
  }
  return fields;
}

EffectKey parse_key(std::string body, const ThetaCatalog& catalog, const std::string& expr) {
  if (body.size() >= 2 && body.front() == '(' && body.back() == ')')
    body = body.substr(1, body.size() - 2);
  const auto fields = parse_fields(body, expr);
  const auto s = catalog.setting;
  auto get = [&](char f) -> int { return to_int(fields.at(f), expr); };
  auto allow = [&](std::initializer_list<char> ok) {
    for (const auto& [name, v] : fields)
      if (std::find(ok.begin(), ok.end(), name) == ok.end())
        throw EstimandSyntaxError("field '" + std::string(1, name) + "' is not a key dimension under " +
                                  to_string(s));
  };
  auto need = [&](char f) {
    if (!fields.count(f))
      throw EstimandSyntaxError("effect key under " + to_string(s) + " needs field '" +
                                std::string(1, f) + "' in '" + expr + "'");
  };
  switch (s) {
    case Setting::S1: {
      allow({'i', 'j', 'a'});
      need('i');
      need('j');
      const int i = get('i');
      const int j = get('j');
      for (const auto& k : catalog.keys)
        if (k.unit == i && k.period == j) {
          if (fields.count('a') && get('a') != k.exposure)
            throw KeyError("unit " + std::to_string(i) + " has exposure " +
                           std::to_string(k.exposure) + " in period " + std::to_string(j));
          return k;
        }
      throw KeyError("unit " + std::to_string(i) + " is not treated in period " + std::to_string(j));
    }
    case Setting::S2:
      allow({'j', 'a'});
      need('j');
      need('a');
      return {0, get('j'), get('a')};
    case Setting::S3:
      allow({'a'});
      need('a');
      return {0, 0, get('a')};
    case Setting::S4:
      allow({'j'});
      need('j');
      return {0, get('j'), 0};
    case Setting::S5:
      allow({});
      return {};
  }
  return {};
}

}  // namespace

EstimandSpec parse_estimand(const std::string& raw, const ThetaCatalog& catalog) {
  const std::string expr = strip(raw);
  if (expr.empty()) throw EmptyEstimandError("empty estimand expression");
  EstimandSpec out;
  const auto colon = expr.find(':');
  const std::string head = colon == std::string::npos ? expr : expr.substr(0, colon);
  const std::string body = colon == std::string::npos ? "" : expr.substr(colon + 1);

  if (head == "attw") {
    out = estimands::attw(catalog);
  } else if (head == "group") {
    KeyFilter::Range r = KeyFilter::kAll;
    if (!body.empty()) {
      const auto f = parse_fields(body, expr);
      if (f.size() != 1 || !f.count('g'))
        throw EstimandSyntaxError("group takes an optional g=lo..hi range");
      r = parse_range(f.at('g'), expr);
    }
    out = estimands::group_average(r.first, r.second, catalog);
  } else if (head == "single") {
    out = estimands::single(parse_key(body, catalog, expr), catalog);
  } else if (head == "contrast") {
    const auto parts = split(body, '-');
    if (parts.size() != 2) throw EstimandSyntaxError("contrast needs (key)-(key): '" + expr + "'");
    out = estimands::contrast(parse_key(parts[0], catalog, expr),
                              parse_key(parts[1], catalog, expr), catalog);
  } else if (head == "avg") {
    const auto f = parse_fields(body, expr);
    if (f.size() != 1)
      throw EstimandSyntaxError("avg buckets over exactly one of a=, j=, g=; use mean: for filters");
    const auto& [dim, text] = *f.begin();
    const auto r = parse_range(text, expr);
    if (dim == 'a')
      out = estimands::exposure_average(r.first, r.second, catalog);
    else if (dim == 'j')
      out = estimands::calendar_average(r.first, r.second, catalog);
    else if (dim == 'g')
      out = estimands::group_average(r.first, r.second, catalog);
    else
      throw EstimandSyntaxError("avg cannot bucket by '" + std::string(1, dim) + "'");
  } else if (head == "mean") {
    KeyFilter filter;
    for (const auto& [dim, text] : parse_fields(body, expr)) {
      const auto r = parse_range(text, expr);
      if (dim == 'i') filter.unit = r;
      if (dim == 'j') filter.period = r;
      if (dim == 'a') filter.exposure = r;
      if (dim == 'g') filter.group = r;
    }
    out = estimands::flat_average(filter, catalog);
  } else if (expr.front() == '(') {
    std::vector<std::pair<EffectKey, double>> terms;
    for (const auto& term : split(expr, ';')) {
      if (term.empty()) continue;
      const auto close = term.rfind(')');
      if (close == std::string::npos || close + 1 >= term.size() || term[close + 1] != '=')
        throw EstimandSyntaxError("explicit term must look like (key)=coeff: '" + term + "'");
      double coeff = 0.0;
      try {
        coeff = csv::parse_double(term.substr(close + 2), "coefficient");
      } catch (const ParseError&) {
        throw EstimandSyntaxError("bad coefficient in '" + term + "'");
      }
      terms.emplace_back(parse_key(term.substr(0, close + 1), catalog, expr), coeff);
    }
    out = estimand(terms, catalog);
  } else {
    throw EstimandSyntaxError("unrecognised estimand '" + expr + "'");
  }
  out.label = expr;
  return out;
}

ExpectationProfile expectation_profile(const Vector& w, Setting setting,
                                       const AdoptionPattern& pattern) {
  auto f = build_f(setting, pattern);
  if (w.size() != f.matrix.rows())
    throw DimensionError("weight vector has length " + std::to_string(w.size()) + ", expected " +
                         std::to_string(f.matrix.rows()));
  return {std::move(f.catalog), f.matrix.transpose() * w};
}

}  // namespace gendid
