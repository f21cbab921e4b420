#include "gendid/simulate.hpp"

#include "gendid/comparators.hpp"
#include "gendid/covariance.hpp"
#include "gendid/estimate.hpp"
#include "gendid/solver.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <thread>

namespace gendid {

std::string to_string(Heterogeneity h) {
  switch (h) {
    case Heterogeneity::Homogeneous: return "homogeneous";
    case Heterogeneity::Calendar: return "calendar";
    case Heterogeneity::Exposure: return "exposure";
  }
  return {};
}

Heterogeneity parse_heterogeneity(const std::string& s) {
  if (s == "homogeneous") return Heterogeneity::Homogeneous;
  if (s == "calendar") return Heterogeneity::Calendar;
  if (s == "exposure") return Heterogeneity::Exposure;
  throw ConfigError("unknown heterogeneity '" + s + "' (expected homogeneous|calendar|exposure)");
}

AdoptionPattern SimScenario::pattern() const {
  std::vector<int> times;
  for (int i = 0; i < n_units(); ++i) times.push_back(2 + i / units_per_sequence);
  return AdoptionPattern::from_times(n_periods(), times);
}

double SimScenario::effect(int adoption, int period) const {
  if (period < adoption) return 0.0;
  switch (heterogeneity) {
    case Heterogeneity::Homogeneous: return theta.at(0);
    case Heterogeneity::Calendar: return theta.at(static_cast<std::size_t>(period - 2));
    case Heterogeneity::Exposure: return theta.at(static_cast<std::size_t>(period - adoption));
  }
  return 0.0;
}

void SimScenario::validate() const {
  const int J = n_periods();
  if (J < 2) throw ConfigError("scenario " + std::to_string(id) + ": need at least 2 periods");
  if (units_per_sequence < 1 || n_units() != units_per_sequence * (J - 1))
    throw ConfigError("scenario " + std::to_string(id) + ": cluster pool of " +
                      std::to_string(n_units()) + " does not fill " + std::to_string(J - 1) +
                      " sequences of " + std::to_string(units_per_sequence));
  const std::size_t want = heterogeneity == Heterogeneity::Homogeneous ? 1u : static_cast<std::size_t>(J - 1);
  if (theta.size() != want)
    throw ConfigError("scenario " + std::to_string(id) + ": " + to_string(heterogeneity) +
                      " effects need " + std::to_string(want) + " values, got " +
                      std::to_string(theta.size()));
  if (n_per_cell < 1 || sigma_e < 0 || sigma_nu < 0)
    throw ConfigError("scenario " + std::to_string(id) + ": invalid noise parameters");
}

SimScenario builtin_scenario(int id) {
  SimScenario s;
  s.id = id;
  switch (id) {
    case 1: s.theta = {0.0}; break;
    case 2: s.theta = {-0.02}; break;
    case 3: s.theta = {-0.04}; break;
    case 4:
      s.heterogeneity = Heterogeneity::Calendar;
      s.theta = {-0.07, -0.05, -0.03, -0.01, 0.01, 0.03, 0.05};
      break;
    case 5:
      s.heterogeneity = Heterogeneity::Calendar;
      s.theta = {-0.07, -0.06, -0.04, 0.0, 0.03, 0.02, 0.01};
      break;
    case 6:
      s.heterogeneity = Heterogeneity::Calendar;
      s.theta = {-0.03, -0.03, -0.03, -0.03, 0.0, 0.0, 0.0};
      break;
    case 7:
      s.heterogeneity = Heterogeneity::Exposure;
      s.theta = {-0.010, -0.015, -0.020, -0.025, -0.030, -0.035, -0.040};
      break;
    case 8:
      s.heterogeneity = Heterogeneity::Exposure;
      s.theta = {0.0, 0.0, -0.03, -0.03, -0.03, -0.03, -0.03};
      break;
    case 9:
      s.heterogeneity = Heterogeneity::Exposure;
      s.theta = {-0.07, -0.05, -0.03, -0.01, 0.01, 0.03, 0.05};
      break;
    default: throw ConfigError("scenario must be 1..9, got " + std::to_string(id));
  }
  return s;
}

PanelData generate_swt(const SimScenario& s, rng::Engine& gen, bool analytic) {
  const AdoptionPattern p = s.pattern();
  const int N = p.n_units();
  const int J = p.n_periods();
  std::vector<double> alpha = s.cluster_pool;
  rng::shuffle(alpha, gen);
  Matrix y(N, J);
  const double cell_sd = s.sigma_e / std::sqrt(static_cast<double>(s.n_per_cell));
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < J; ++j) {
      const double mu = s.mu + alpha[static_cast<std::size_t>(i)] + s.b[static_cast<std::size_t>(j)] +
                        s.sigma_nu * rng::normal(gen) + s.effect(p.adoption(i + 1), j + 1);
      if (analytic) {
        y(i, j) = mu + cell_sd * rng::normal(gen);
      } else {
        double sum = 0.0;
        for (int k = 0; k < s.n_per_cell; ++k) sum += mu + s.sigma_e * rng::normal(gen);
        y(i, j) = sum / s.n_per_cell;
      }
    }
  return make_panel(p, std::move(y));
}

PanelData generate_swt(const SimScenario& s, std::uint64_t seed, bool analytic) {
  auto gen = rng::stream(seed, 0);
  return generate_swt(s, gen, analytic);
}

const std::vector<RegistryEntry>& registry() {
  using K = EstimatorKind;
  using S = Setting;
  static const std::vector<RegistryEntry> entries = {
      {"O1", "GD S5 overall", K::GD, S::S5, "attw", "", S::S5, "attw"},
      {"O2", "TW two-way fixed effects", K::SA, S::S5, "", "tw", S::S5, "attw"},
      {"O3", "ME S5", K::ME, S::S5, "", "", S::S5, "attw"},
      {"O4", "CO-3 equal weights", K::SA, S::S5, "", "co:3", S::S5, "attw"},
      {"O5", "GD S4 calendar average", K::GD, S::S4, "avg:j=2..7", "", S::S4, "avg:j=2..7"},
      {"O6", "ME S4", K::ME, S::S4, "", "", S::S4, "avg:j=2..7"},
      {"O7", "CS calendar ATT", K::SA, S::S4, "", "cs:calendar", S::S4, "avg:j=2..7"},
      {"O8", "GD S2 calendar average", K::GD, S::S2, "avg:j=2..7", "", S::S2, "avg:j=2..7"},
      {"O9", "ME S2 calendar", K::ME, S::S2, "", "", S::S2, "avg:j=2..7"},
      {"O10", "GD S3 exposure average 1..7", K::GD, S::S3, "avg:a=1..7", "", S::S3, "avg:a=1..7"},
      {"O11", "ME S3", K::ME, S::S3, "", "", S::S3, "avg:a=1..7"},
      {"O12", "GD S3 exposure average 1..6", K::GD, S::S3, "avg:a=1..6", "", S::S3, "avg:a=1..6"},
      {"O13", "CS dynamic ATT", K::SA, S::S3, "", "cs:dynamic", S::S3, "avg:a=1..6"},
      {"O14", "GD S2 exposure average", K::GD, S::S2, "avg:a=1..6", "", S::S2, "avg:a=1..6"},
      {"O15", "ME S2 exposure", K::ME, S::S2, "", "", S::S2, "avg:a=1..6"},
      {"O16", "GD S2 group average", K::GD, S::S2, "avg:g=2..7", "", S::S2, "avg:g=2..7"},
      {"O17", "CS group ATT", K::SA, S::S2, "", "cs:group", S::S2, "avg:g=2..7"},
      {"O18", "GD S2 ATT", K::GD, S::S2, "attw", "", S::S2, "attw"},
      {"O19", "CS simple ATT", K::SA, S::S2, "", "cs:simple", S::S2, "attw"},
      {"O20", "SA interaction-weighted ATT", K::SA, S::S2, "", "sa", S::S2, "attw"},
      {"O21", "ME S2 ATT", K::ME, S::S2, "", "", S::S2, "attw"},
      {"P1", "GD S4 period 3", K::GD, S::S4, "single:j=3", "", S::S4, "single:j=3"},
      {"P2", "ME S4 period 3", K::ME, S::S4, "", "", S::S4, "single:j=3"},
      {"P3", "GD S2 period 3", K::GD, S::S2, "avg:j=3..3", "", S::S2, "avg:j=3..3"},
      {"P4", "ME S2 period 3", K::ME, S::S2, "", "", S::S2, "avg:j=3..3"},
      {"P5", "GD S3 exposure 2", K::GD, S::S3, "single:a=2", "", S::S3, "single:a=2"},
      {"P6", "ME S3 exposure 2", K::ME, S::S3, "", "", S::S3, "single:a=2"},
      {"P7", "GD S2 exposure 2", K::GD, S::S2, "avg:a=2..2", "", S::S2, "avg:a=2..2"},
      {"P8", "ME S2 exposure 2", K::ME, S::S2, "", "", S::S2, "avg:a=2..2"},
      {"P9", "GD S3 exposure 1", K::GD, S::S3, "single:a=1", "", S::S3, "single:a=1"},
      {"P10", "ME S3 exposure 1", K::ME, S::S3, "", "", S::S3, "single:a=1"},
      {"P11", "CO-2 proportional weights", K::SA, S::S2, "", "co:2", S::S3, "single:a=1"},
      {"P12", "GD S2 exposure 1", K::GD, S::S2, "avg:a=1..1", "", S::S2, "avg:a=1..1"},
      {"P13", "ME S2 exposure 1", K::ME, S::S2, "", "", S::S2, "avg:a=1..1"},
      {"P14", "CH first-difference", K::SA, S::S2, "", "ch", S::S3, "single:a=1"},
      {"P15", "CO-1 equal weights", K::SA, S::S2, "", "co:1", S::S3, "single:a=1"},
  };
  return entries;
}

const RegistryEntry& registry_entry(const std::string& id) {
  for (const auto& e : registry())
    if (e.id == id) return e;
  throw ConfigError("unknown registry entry '" + id + "'");
}

std::vector<std::string> default_entries(const SimScenario& s) {
  std::vector<std::string> out;
  for (const auto& e : registry()) {
    if (e.kind == EstimatorKind::ME) continue;
    if (s.heterogeneity == Heterogeneity::Calendar && e.target_setting == Setting::S3) continue;
    if (s.heterogeneity == Heterogeneity::Exposure && e.target_setting == Setting::S4) continue;
    out.push_back(e.id);
  }
  return out;
}

double target_value(const RegistryEntry& e, const SimScenario& s) {
  const AdoptionPattern p = s.pattern();
  const auto catalog = enumerate_theta(e.target_setting, p);
  const auto spec = parse_estimand(e.target, catalog);
  Vector theta = Vector::Zero(catalog.size());
  Vector count = Vector::Zero(catalog.size());
  for (int i = 1; i <= p.n_units(); ++i)
    for (int j = p.adoption(i); j <= p.n_periods(); ++j) {
      const Index k = catalog.find(key_for_cell(e.target_setting, p, i, j));
      theta(k) += s.effect(p.adoption(i), j);
      count(k) += 1.0;
    }
  return spec.v.dot(theta.cwiseQuotient(count));
}

namespace {

Vector entry_weights(const RegistryEntry& e, const AdoptionPattern& p, const DidSystem& sys,
                     const WorkingCovariance& m) {
  switch (e.kind) {
    case EstimatorKind::GD: {
      const auto f = build_f(e.setting, p);
      const auto spec = parse_estimand(e.estimand, f.catalog);
      return solve_min_variance(sys, f, spec.v, m).obs_weights;
    }
    case EstimatorKind::SA: return comparator(e.method, p).obs_weights;
    case EstimatorKind::ME: break;
  }
  throw UnsupportedEstimatorError("entry " + e.id + " (" + e.label +
                                  ") is a mixed-effects model estimator, which is not supported");
}

}  // namespace

std::vector<StudyRow> run_study(const std::vector<SimScenario>& scenarios, const StudyOptions& opts) {
  if (opts.n_sims < 1) throw ConfigError("number of simulations must be at least 1");
  if (opts.n_perm < 1) throw ConfigError("number of permutations must be at least 1");
  std::vector<StudyRow> rows;
  for (const auto& sc : scenarios) {
    sc.validate();
    const auto ids = opts.entries.empty() ? default_entries(sc) : opts.entries;
    const AdoptionPattern p = sc.pattern();
    const DidSystem sys(p);
    // Generalized DID rows use independent working covariance.
    const auto m = build_m(CovStructure::Independent, 0.0, p.n_units(), p.n_periods());
    std::vector<const RegistryEntry*> entries;
    std::vector<Vector> weights;
    for (const auto& id : ids) {
      entries.push_back(&registry_entry(id));
      weights.push_back(entry_weights(*entries.back(), p, sys, m));
    }

    const std::size_t E = entries.size();
    const auto n = static_cast<std::size_t>(opts.n_sims);
    std::vector<double> est(E * n), pval(E * n);
    auto run = [&](int begin, int end) {
      for (int r = begin; r < end; ++r) {
        auto gen = rng::stream(opts.seed, static_cast<std::uint64_t>(sc.id), static_cast<std::uint64_t>(r));
        const PanelData panel = generate_swt(sc, gen, opts.analytic);
        PermutationOptions po;
        po.n_perm = opts.n_perm;
        po.seed = rng::derive(opts.seed, static_cast<std::uint64_t>(sc.id), static_cast<std::uint64_t>(r));
        for (std::size_t e = 0; e < E; ++e) {
          const auto res = permutation_test(weights[e], panel, po);
          est[e * n + static_cast<std::size_t>(r)] = res.point;
          pval[e * n + static_cast<std::size_t>(r)] = *res.perm_p;
        }
      }
    };
    const int workers = std::clamp(opts.workers, 1, opts.n_sims);
    if (workers == 1) {
      run(0, opts.n_sims);
    } else {
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
      const int chunk = (opts.n_sims + workers - 1) / workers;
      for (int w = 0; w < workers; ++w) {
        const int b = w * chunk;
        const int e = std::min(opts.n_sims, b + chunk);
        if (b < e)
          pool.emplace_back([&, w, b, e] {
            try {
              run(b, e);
            } catch (...) {
              errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
          });
      }
      for (auto& t : pool) t.join();
      for (auto& err : errors)
        if (err) std::rethrow_exception(err);
    }

    for (std::size_t e = 0; e < E; ++e) {
      StudyRow row;
      row.scenario = sc.id;
      row.entry = entries[e]->id;
      row.label = entries[e]->label;
      row.n_sims = opts.n_sims;
      row.n_perm = opts.n_perm;
      row.truth = target_value(*entries[e], sc);
      const double* x = est.data() + e * n;
      const double* pv = pval.data() + e * n;
      row.mean = std::accumulate(x, x + n, 0.0) / static_cast<double>(n);
      double ss = 0.0;
      int hits = 0;
      for (std::size_t r = 0; r < n; ++r) {
        ss += (x[r] - row.mean) * (x[r] - row.mean);
        hits += pv[r] < opts.alpha;
      }
      row.sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
      row.power = static_cast<double>(hits) / static_cast<double>(n);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace gendid
