#include "gendid/cli.hpp"

#include "gendid/assumptions.hpp"
#include "gendid/comparators.hpp"
#include "gendid/covariance.hpp"
#include "gendid/csv.hpp"
#include "gendid/didmat.hpp"
#include "gendid/estimate.hpp"
#include "gendid/panel.hpp"
#include "gendid/simulate.hpp"
#include "gendid/solver.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#ifndef GENDID_VERSION
#define GENDID_VERSION "0.0.0"
#endif
#ifndef GENDID_GIT_REV
#define GENDID_GIT_REV "unknown"
#endif

namespace gendid::cli {

std::string version_string() {
  return std::string("gendid ") + GENDID_VERSION + " (" + GENDID_GIT_REV + ")";
}

namespace {

namespace fs = std::filesystem;
using csv::format_number;
using nlohmann::ordered_json;

constexpr std::uint64_t kDefaultSeed = 42;
constexpr std::uint64_t kDefaultSimSeed = 7;

struct SourceOpts {
  std::string panel;
  std::string format = "long";
  std::string transform = "identity";
  std::string design;
  int periods = 0;
};

struct CovOpts {
  std::string cov = "independent";
  double rho = 0.0;
  std::string rel_var;
};

struct Io {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

void add_source(CLI::App* sub, SourceOpts& s, bool design_allowed) {
  auto* panel = sub->add_option("--panel", s.panel, "Panel CSV path, or - for stdin");
  sub->add_option("--format", s.format, "Panel layout")
      ->check(CLI::IsMember({"long", "wide"}))
      ->capture_default_str();
  sub->add_option("--transform", s.transform, "Outcome transform")
      ->check(CLI::IsMember({"identity", "log", "logit"}))
      ->capture_default_str();
  if (design_allowed) {
    auto* design = sub->add_option("--design", s.design,
                                   "Adoption periods per unit, comma separated (never = untreated)");
    sub->add_option("--periods", s.periods, "Number of periods for --design");
    panel->excludes(design);
  }
}

void add_cov(CLI::App* sub, CovOpts& c) {
  sub->add_option("--cov", c.cov, "independent | exchangeable | ar1 | custom:<path>")->capture_default_str();
  sub->add_option("--rho", c.rho, "Correlation parameter")->capture_default_str();
  sub->add_option("--rel-var", c.rel_var, "Relative standard deviations (N x J or NJ values, input order)");
}

void require_input(const std::string& path, const std::string& what) {
  if (path.empty() || path == "-") return;
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw ConfigError(what + " '" + path + "' does not exist");
}

void require_output(const std::string& path) {
  if (path.empty() || path == "-") return;
  const fs::path parent = fs::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty() && !fs::is_directory(parent, ec))
    throw ConfigError("output directory '" + parent.string() + "' does not exist");
}

void validate_source(const SourceOpts& s, bool need_data) {
  if (s.panel.empty() && s.design.empty())
    throw ConfigError(need_data ? "--panel is required" : "one of --panel or --design is required");
  if (need_data && s.panel.empty()) throw ConfigError("--panel is required");
  if (!s.design.empty() && s.periods < 2) throw ConfigError("--design needs --periods >= 2");
  require_input(s.panel, "panel file");
}

void validate_cov(const CovOpts& c) {
  if (c.cov.rfind("custom:", 0) == 0) require_input(c.cov.substr(7), "covariance file");
  require_input(c.rel_var, "relative SD file");
}

PanelData load_source(const SourceOpts& s, std::istream& in) {
  if (!s.design.empty()) {
    std::vector<int> times;
    std::stringstream ss(s.design);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = csv::trim(tok);
      if (tok == "never" || tok == "NA" || tok == "inf" || tok.empty())
        times.push_back(s.periods + 1);
      else
        times.push_back(csv::parse_int(tok, "--design entry"));
    }
    auto pattern = AdoptionPattern::from_times(s.periods, times);
    return make_panel(pattern, Matrix::Zero(pattern.n_units(), s.periods));
  }
  const auto format = s.format == "wide" ? PanelFormat::Wide : PanelFormat::Long;
  const auto transform = parse_transform(s.transform);
  if (s.panel == "-") return load_panel(in, format, transform);
  return load_panel_file(s.panel, format, transform);
}

// Maps a unit-major index in canonical order back to the input order.
Index input_index(const PanelData& p, Index k) {
  const Index J = p.n_periods();
  return static_cast<Index>(p.order[static_cast<std::size_t>(k / J)]) * J + k % J;
}

WorkingCovariance load_cov(const CovOpts& c, const PanelData& p) {
  const int N = p.n_units();
  const int J = p.n_periods();
  const Index NJ = static_cast<Index>(N) * J;
  if (c.cov.rfind("custom:", 0) == 0) {
    if (!c.rel_var.empty()) throw ConfigError("--rel-var cannot be combined with a custom covariance");
    const auto raw = load_custom_m(c.cov.substr(7));
    if (raw.matrix.rows() != NJ)
      throw CovarianceParamError("custom covariance is " + std::to_string(raw.matrix.rows()) +
                                 "x" + std::to_string(raw.matrix.cols()) + ", expected NJ=" +
                                 std::to_string(NJ));
    Matrix m(NJ, NJ);
    for (Index a = 0; a < NJ; ++a)
      for (Index b = 0; b < NJ; ++b) m(a, b) = raw.matrix(input_index(p, a), input_index(p, b));
    return custom_m(std::move(m));
  }
  Vector sd;
  if (!c.rel_var.empty()) {
    Matrix raw;
    try {
      raw = csv::read_matrix_file(c.rel_var);
    } catch (const ParseError& e) {
      throw CovarianceParamError(e.what());
    }
    if (raw.size() != NJ)
      throw CovarianceParamError("relative SD file has " + std::to_string(raw.size()) +
                                 " values, expected NJ=" + std::to_string(NJ));
    // Row-major reading of an N x J table or a flat list.
    const Matrix rt = raw.transpose();
    const Vector flat = Eigen::Map<const Vector>(rt.data(), rt.size());
    sd.resize(NJ);
    for (Index k = 0; k < NJ; ++k) sd(k) = flat(input_index(p, k));
  }
  return parse_covariance(c.cov, c.rho, N, J, sd);
}

// Opens `path` for writing, or returns `fallback` for "" / "-".
std::ostream& open_out(const std::string& path, std::ofstream& file, std::ostream& fallback) {
  if (path.empty() || path == "-") return fallback;
  file.open(path);
  if (!file) throw ConfigError("cannot write '" + path + "'");
  return file;
}

double round12(double x) { return std::stod(format_number(x)); }

ordered_json optional_number(const std::optional<double>& x) {
  if (!x.has_value()) return nullptr;
  return round12(x.value_or(0.0));
}

ordered_json feasibility_json(const Feasibility& f) {
  ordered_json j;
  j["class"] = to_string(f.cls);
  j["rank_f"] = f.rank_f;
  j["rank_f_aug"] = f.rank_f_aug;
  j["free_dim"] = f.free_dim;
  j["w_nullity"] = f.w_nullity;
  return j;
}

std::string identifiable_list(const ThetaCatalog& c) {
  std::string s;
  for (Index k = 0; k < c.size(); ++k)
    if (c.identifiable[static_cast<std::size_t>(k)]) s += (s.empty() ? "(" : " (") + to_string(c.keys[static_cast<std::size_t>(k)], c.setting) + ")";
  return s.empty() ? "none" : s;
}

struct Solved {
  FMatrix f;
  EstimandSpec spec;
  WeightSolution sol;
};

Solved solve(const PanelData& p, const std::string& setting, const std::string& expr,
             const WorkingCovariance& m, std::ostream& err) {
  Solved s;
  const DidSystem sys(p.pattern);
  s.f = build_f(parse_setting(setting), p.pattern);
  s.spec = parse_estimand(expr, s.f.catalog);
  try {
    s.sol = solve_min_variance(sys, s.f, s.spec.v, m);
  } catch (const InfeasibleEstimandError&) {
    err << "identifiable effects under " << setting << ": " << identifiable_list(s.f.catalog) << "\n";
    throw;
  }
  return s;
}

void write_did_header(std::ostream& os, const PanelData& p) {
  os << "row,i,i_prime,j,j_prime,type";
  (void)p;
}

std::string unit_label(const PanelData& p, int unit) { return p.unit_labels[static_cast<std::size_t>(unit - 1)]; }
std::string period_label(const PanelData& p, int period) {
  return p.period_labels[static_cast<std::size_t>(period - 1)];
}

void write_obs_weights(std::ostream& os, const PanelData& p, const Vector& o) {
  os << "unit,period,adoption_period,weight\n";
  const int J = p.n_periods();
  for (int i = 1; i <= p.n_units(); ++i)
    for (int j = 1; j <= J; ++j) {
      const int T = p.pattern.adoption(i);
      os << unit_label(p, i) << "," << period_label(p, j) << ","
         << (T > J ? std::string("never") : period_label(p, T)) << ","
         << format_number(o((i - 1) * J + j - 1)) << "\n";
    }
}

void write_did_weights(std::ostream& os, const PanelData& p, const Vector& w) {
  write_did_header(os, p);
  os << ",weight\n";
  for_each_did(p.n_units(), p.n_periods(), [&](std::int64_t r, const DidIndex& d) {
    os << r + 1 << "," << unit_label(p, d.i) << "," << unit_label(p, d.i_prime) << ","
       << period_label(p, d.j) << "," << period_label(p, d.j_prime) << ","
       << classify_did(d, p.pattern) << "," << format_number(w(r)) << "\n";
  });
}

// ---- design ----

struct DesignOpts {
  SourceOpts src;
  std::string setting;
  std::string export_a, export_f;
};

int cmd_design(const DesignOpts& o, bool dry, Io io) {
  validate_source(o.src, false);
  require_output(o.export_a);
  require_output(o.export_f);
  if (!o.setting.empty()) parse_setting(o.setting);
  const PanelData p = load_source(o.src, io.in);
  const int N = p.n_units();
  const int J = p.n_periods();
  if (dry) {
    io.out << "plan: design summary for N=" << N << " J=" << J;
    if (!o.setting.empty()) io.out << ", effect catalog under " << o.setting;
    if (!o.export_a.empty()) io.out << ", A -> " << o.export_a;
    if (!o.export_f.empty()) io.out << ", F -> " << o.export_f;
    io.out << "\n";
    return kOk;
  }
  const DidSystem sys(p.pattern);
  io.out << "units=" << N << " periods=" << J << " did_rows=" << sys.n_rows()
         << " rank_A=" << (N - 1) * (J - 1) << "\n";
  io.out << "adoption:";
  for (int i = 1; i <= N; ++i) {
    const int T = p.pattern.adoption(i);
    io.out << " " << unit_label(p, i) << "=" << (T > J ? std::string("never") : period_label(p, T));
  }
  io.out << "\n";
  const auto counts = count_types(p.pattern);
  io.out << "types:";
  for (int t = 0; t < 6; ++t) io.out << " " << t + 1 << "=" << counts[static_cast<std::size_t>(t)];
  io.out << "\n";
  if (!o.export_a.empty()) {
    std::ofstream f;
    auto& os = open_out(o.export_a, f, io.out);
    write_did_header(os, p);
    for (int i = 1; i <= N; ++i)
      for (int j = 1; j <= J; ++j) os << ",Y_" << unit_label(p, i) << "_" << period_label(p, j);
    os << "\n";
    for_each_did(N, J, [&](std::int64_t r, const DidIndex& d) {
      os << r + 1 << "," << unit_label(p, d.i) << "," << unit_label(p, d.i_prime) << ","
         << period_label(p, d.j) << "," << period_label(p, d.j_prime) << "," << sys.type(r);
      std::vector<int> row(static_cast<std::size_t>(N * J), 0);
      const auto t = row_terms(d, J);
      for (int k = 0; k < 4; ++k) row[static_cast<std::size_t>(t.col[k])] = t.sign[k];
      for (int v : row) os << "," << v;
      os << "\n";
    });
  }
  if (!o.setting.empty()) {
    const auto f = build_f(parse_setting(o.setting), p.pattern);
    io.out << "effects under " << o.setting << " (" << f.catalog.size() << "):\n";
    for (Index k = 0; k < f.catalog.size(); ++k)
      io.out << "  (" << to_string(f.catalog.keys[static_cast<std::size_t>(k)], f.catalog.setting) << ") "
             << (f.catalog.identifiable[static_cast<std::size_t>(k)] ? "identifiable" : "not identifiable")
             << "\n";
    if (!o.export_f.empty()) {
      std::ofstream file;
      auto& os = open_out(o.export_f, file, io.out);
      os << "row";
      for (const auto& k : f.catalog.keys) os << ",\"" << to_string(k, f.catalog.setting) << "\"";
      os << "\n";
      for (Index r = 0; r < f.matrix.rows(); ++r) {
        os << r + 1;
        for (Index c = 0; c < f.matrix.cols(); ++c) os << "," << format_number(f.matrix(r, c));
        os << "\n";
      }
    }
  } else if (!o.export_f.empty()) {
    throw ConfigError("--export-f needs --setting");
  }
  return kOk;
}

// ---- weights ----

struct WeightsOpts {
  SourceOpts src;
  CovOpts cov;
  std::string setting = "S5";
  std::string estimand = "attw";
  std::string out_weights, out_obs;
};

int cmd_weights(const WeightsOpts& o, bool dry, Io io) {
  validate_source(o.src, false);
  validate_cov(o.cov);
  require_output(o.out_weights);
  require_output(o.out_obs);
  parse_setting(o.setting);
  const PanelData p = load_source(o.src, io.in);
  const auto m = load_cov(o.cov, p);
  if (dry) {
    io.out << "plan: minimum-variance weights for N=" << p.n_units() << " J=" << p.n_periods()
           << ", setting " << o.setting << ", estimand " << o.estimand << ", covariance "
           << to_string(m.structure) << " rho=" << format_number(m.rho) << "\n";
    return kOk;
  }
  const auto s = solve(p, o.setting, o.estimand, m, io.err);
  io.out << "estimand: " << s.spec.label << "\n";
  io.out << "feasibility: " << s.sol.feasibility.report() << "\n";
  io.out << "scaled_variance: " << format_number(s.sol.scaled_variance) << "\n";
  io.out << "constraint_residual: " << format_number(s.sol.constraint_residual) << "\n";
  if (!o.out_weights.empty()) {
    std::ofstream f;
    write_did_weights(open_out(o.out_weights, f, io.out), p, s.sol.w);
  }
  if (!o.out_obs.empty()) {
    std::ofstream f;
    write_obs_weights(open_out(o.out_obs, f, io.out), p, s.sol.obs_weights);
  }
  return kOk;
}

// ---- estimate ----

struct EstimateOpts {
  SourceOpts src;
  CovOpts cov;
  std::string setting = "S5";
  std::string estimand = "attw";
  int perms = 1000;
  std::uint64_t seed = kDefaultSeed;
  std::string sided = "two";
  int workers = 1;
  std::string vhat;
  std::string out;
  std::string out_draws;
};

int cmd_estimate(const EstimateOpts& o, bool dry, Io io) {
  validate_source(o.src, true);
  validate_cov(o.cov);
  require_input(o.vhat, "variance file");
  require_output(o.out);
  require_output(o.out_draws);
  parse_setting(o.setting);
  const Sided sided = parse_sided(o.sided);
  if (o.perms < 0) throw ConfigError("--perms must be >= 0");
  const PanelData p = load_source(o.src, io.in);
  const auto m = load_cov(o.cov, p);
  if (dry) {
    io.out << "plan: estimate on " << p.n_units() << "x" << p.n_periods() << " panel ("
           << to_string(p.transform) << "), setting " << o.setting << ", estimand " << o.estimand
           << ", covariance " << to_string(m.structure) << " rho=" << format_number(m.rho) << ", "
           << o.perms << " permutations (" << to_string(sided) << "-sided, seed " << o.seed
           << ", workers " << o.workers << ") -> " << (o.out.empty() ? "stdout" : o.out) << "\n";
    return kOk;
  }
  const auto s = solve(p, o.setting, o.estimand, m, io.err);
  EstimateResult r;
  if (o.perms > 0) {
    PermutationOptions po;
    po.n_perm = o.perms;
    po.seed = o.seed;
    po.sided = sided;
    po.workers = o.workers;
    po.keep_draws = !o.out_draws.empty();
    r = permutation_test(s.sol, p, po);
  } else {
    r.point = point_estimate(s.sol, p);
    r.seed = o.seed;
    if (p.transform != Transform::Identity) r.back_transformed = back_transform(r.point, p.transform);
  }
  if (!o.vhat.empty()) {
    Matrix raw;
    try {
      raw = csv::read_matrix_file(o.vhat);
    } catch (const ParseError& e) {
      throw CovarianceParamError(e.what());
    }
    const Index NJ = raw.rows();
    if (raw.cols() != NJ || NJ != s.sol.obs_weights.size())
      throw CovarianceParamError("variance file must be NJ x NJ");
    Matrix v(NJ, NJ);
    for (Index a = 0; a < NJ; ++a)
      for (Index b = 0; b < NJ; ++b) v(a, b) = raw(input_index(p, a), input_index(p, b));
    r.plug_in_var = plug_in_variance(s.sol.obs_weights, v);
  }

  ordered_json j;
  j["point"] = round12(r.point);
  j["ratio"] = optional_number(r.back_transformed);
  j["transform"] = to_string(p.transform);
  j["p_value"] = optional_number(r.perm_p);
  j["n_perm"] = o.perms;
  j["sided"] = to_string(sided);
  j["seed"] = o.seed;
  j["setting"] = o.setting;
  j["estimand"] = s.spec.label;
  j["scaled_variance"] = round12(s.sol.scaled_variance);
  j["plug_in_variance"] = optional_number(r.plug_in_var);
  j["covariance"] = {{"structure", to_string(m.structure)}, {"rho", round12(m.rho)}};
  j["feasibility"] = feasibility_json(s.sol.feasibility);
  j["n_units"] = p.n_units();
  j["n_periods"] = p.n_periods();
  std::ofstream f;
  open_out(o.out, f, io.out) << j.dump(2) << "\n";
  if (!o.out_draws.empty()) {
    std::ofstream df;
    auto& os = open_out(o.out_draws, df, io.out);
    os << "replicate,estimate\n";
    for (std::size_t k = 0; k < r.null_draws.size(); ++k)
      os << k + 1 << "," << format_number(r.null_draws[k]) << "\n";
  }
  return kOk;
}

// ---- compare ----

struct CompareOpts {
  SourceOpts src;
  std::string methods = "tw,cs:simple,cs:dynamic,cs:group,cs:calendar,sa,ch,co:1,co:2,co:3,np:equal";
  int perms = 1000;
  std::uint64_t seed = kDefaultSeed;
  int workers = 1;
  std::string out;
  std::string weights_dir;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!csv::trim(tok).empty()) out.push_back(csv::trim(tok));
  return out;
}

int cmd_compare(const CompareOpts& o, bool dry, Io io) {
  validate_source(o.src, false);
  require_output(o.out);
  if (!o.weights_dir.empty() && !fs::is_directory(o.weights_dir))
    throw ConfigError("weights directory '" + o.weights_dir + "' does not exist");
  const auto methods = split_list(o.methods);
  if (methods.empty()) throw ConfigError("--methods is empty");
  const PanelData p = load_source(o.src, io.in);
  // Resolve method names up front so typos fail before any output.
  std::vector<ComparatorSpec> specs;
  for (const auto& m : methods) specs.push_back(comparator(m, p.pattern));
  const bool have_data = o.src.design.empty();
  if (dry) {
    io.out << "plan: compare " << o.methods << " on N=" << p.n_units() << " J=" << p.n_periods();
    if (have_data) io.out << " with " << o.perms << " permutations (seed " << o.seed << ")";
    io.out << "\n";
    return kOk;
  }
  std::ofstream f;
  auto& os = open_out(o.out, f, io.out);
  os << "method,estimate,p_value,warning\n";
  for (const auto& spec : specs) {
    for (const auto& w : spec.warnings) io.err << "warning: " << spec.method << ": " << w << "\n";
    std::string est, pv;
    if (have_data) {
      if (o.perms > 0) {
        PermutationOptions po;
        po.n_perm = o.perms;
        po.seed = o.seed;
        po.workers = o.workers;
        const auto r = permutation_test(spec.obs_weights, p, po);
        est = format_number(r.point);
        pv = format_number(*r.perm_p);
      } else {
        est = format_number(point_estimate(spec.obs_weights, p));
      }
    }
    os << spec.method << "," << est << "," << pv << ","
       << (spec.warnings.empty() ? "" : "\"" + spec.warnings.front() + "\"") << "\n";
    if (!o.weights_dir.empty()) {
      std::string stem = spec.method;
      std::replace(stem.begin(), stem.end(), ':', '_');
      std::ofstream wf((fs::path(o.weights_dir) / (stem + "_obs.csv")).string());
      write_obs_weights(wf, p, spec.obs_weights);
      if (spec.did_weights) {
        std::ofstream df((fs::path(o.weights_dir) / (stem + "_did.csv")).string());
        write_did_weights(df, p, *spec.did_weights);
      }
    }
  }
  return kOk;
}

// ---- simulate ----

struct SimulateOpts {
  std::string scenarios = "1..9";
  int sims = 1000;
  int perms = 250;
  std::uint64_t seed = kDefaultSimSeed;
  int workers = 1;
  std::string entries;
  bool analytic = false;
  std::string out;
};

std::vector<int> parse_scenario_list(const std::string& s) {
  std::vector<int> ids;
  for (const auto& tok : split_list(s)) {
    const auto dots = tok.find("..");
    if (dots == std::string::npos) {
      ids.push_back(csv::parse_int(tok, "--scenario"));
    } else {
      const int lo = csv::parse_int(tok.substr(0, dots), "--scenario");
      const int hi = csv::parse_int(tok.substr(dots + 2), "--scenario");
      for (int k = lo; k <= hi; ++k) ids.push_back(k);
    }
  }
  if (ids.empty()) throw ConfigError("--scenario selects nothing");
  return ids;
}

std::vector<double> parse_numbers(const std::vector<std::string>& inputs, const std::string& what) {
  std::vector<double> out;
  for (const auto& in : inputs) {
    std::stringstream ss(in);
    std::string tok;
    while (ss >> tok) {
      for (const auto& part : split_list(tok)) out.push_back(csv::parse_double(part, what));
    }
  }
  return out;
}

// [scenario.<id>] blocks in the config file override or add scenarios.
std::map<int, SimScenario> scenario_overrides(const std::string& config_path) {
  std::map<int, SimScenario> out;
  if (config_path.empty()) return out;
  std::ifstream in(config_path);
  if (!in) throw ConfigError("cannot read config '" + config_path + "'");
  const auto items = CLI::ConfigINI().from_config(in);
  for (const auto& item : items) {
    if (item.parents.size() != 2 || item.parents[0] != "scenario") continue;
    if (item.name == "++" || item.name == "--") continue;
    const int id = csv::parse_int(item.parents[1], "scenario block id");
    auto it = out.find(id);
    if (it == out.end()) {
      SimScenario base = id >= 1 && id <= 9 ? builtin_scenario(id) : SimScenario{};
      base.id = id;
      it = out.emplace(id, base).first;
    }
    auto& sc = it->second;
    const std::string ctx = "scenario." + std::to_string(id) + "." + item.name;
    auto scalar = [&]() {
      const auto v = parse_numbers(item.inputs, ctx);
      if (v.size() != 1) throw ConfigError(ctx + " expects one number");
      return v.front();
    };
    if (item.name == "heterogeneity") sc.heterogeneity = parse_heterogeneity(item.inputs.at(0));
    else if (item.name == "theta") sc.theta = parse_numbers(item.inputs, ctx);
    else if (item.name == "mu") sc.mu = scalar();
    else if (item.name == "b") sc.b = parse_numbers(item.inputs, ctx);
    else if (item.name == "sigma_nu") sc.sigma_nu = scalar();
    else if (item.name == "sigma_e") sc.sigma_e = scalar();
    else if (item.name == "cluster_pool") sc.cluster_pool = parse_numbers(item.inputs, ctx);
    else if (item.name == "n_per_cell") sc.n_per_cell = static_cast<int>(scalar());
    else if (item.name == "units_per_sequence") sc.units_per_sequence = static_cast<int>(scalar());
    else throw ConfigError("unknown scenario key '" + ctx + "'");
  }
  for (const auto& [id, sc] : out) sc.validate();
  return out;
}

int cmd_simulate(const SimulateOpts& o, const std::string& config_path, bool dry, Io io) {
  require_output(o.out);
  const auto overrides = scenario_overrides(config_path);
  std::vector<SimScenario> scenarios;
  for (int id : parse_scenario_list(o.scenarios)) {
    const auto it = overrides.find(id);
    scenarios.push_back(it != overrides.end() ? it->second : builtin_scenario(id));
  }
  StudyOptions so;
  so.n_sims = o.sims;
  so.n_perm = o.perms;
  so.seed = o.seed;
  so.workers = o.workers;
  so.analytic = o.analytic;
  so.entries = split_list(o.entries);
  for (const auto& e : so.entries)
    if (registry_entry(e).kind == EstimatorKind::ME)
      throw UnsupportedEstimatorError("entry " + e + " is a mixed-effects model estimator, which is not supported");
  if (so.n_sims < 1 || so.n_perm < 1) throw ConfigError("--sims and --perms must be >= 1");
  if (dry) {
    io.out << "plan: simulate scenarios";
    for (const auto& s : scenarios) io.out << " " << s.id;
    io.out << ", " << o.sims << " replicates x " << o.perms << " permutations, seed " << o.seed
           << ", workers " << o.workers << (o.analytic ? ", analytic cell means" : "") << "\n";
    return kOk;
  }
  const auto rows = run_study(scenarios, so);
  std::ofstream f;
  auto& os = open_out(o.out, f, io.out);
  os << "scenario,entry,label,truth,mean,sd,power,n_sims,n_perm\n";
  for (const auto& r : rows)
    os << r.scenario << "," << r.entry << ",\"" << r.label << "\"," << format_number(r.truth) << ","
       << format_number(r.mean) << "," << format_number(r.sd) << "," << format_number(r.power)
       << "," << r.n_sims << "," << r.n_perm << "\n";
  return kOk;
}

int status_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return kConfig;
    case ErrorKind::Infeasible: return kInfeasible;
    case ErrorKind::Data: return kData;
    case ErrorKind::Numerical: return kNumerical;
  }
  return kNumerical;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Generalized difference-in-differences for staggered adoption designs", "gendid"};
  app.set_version_flag("--version", version_string());
  auto* config = app.set_config("--config", "", "Key-value config file; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::ignore_all);
  app.require_subcommand(1);
  bool dry = false;
  app.add_flag("--dry-run", dry, "Validate inputs and print the planned pipeline");

  DesignOpts d;
  auto* design = app.add_subcommand("design", "Summarize a design; export A and F");
  add_source(design, d.src, true);
  design->add_option("--setting", d.setting, "Effect setting S1..S5 for the effect catalog");
  design->add_option("--export-a", d.export_a, "Write A as CSV");
  design->add_option("--export-f", d.export_f, "Write F as CSV (needs --setting)");

  WeightsOpts w;
  auto* weights = app.add_subcommand("weights", "Minimum-variance unbiased weights");
  add_source(weights, w.src, true);
  add_cov(weights, w.cov);
  weights->add_option("--setting", w.setting, "S1..S5")->capture_default_str();
  weights->add_option("--estimand", w.estimand, "Estimand expression")->capture_default_str();
  weights->add_option("--out-weights", w.out_weights, "DID weights CSV");
  weights->add_option("--out-obs-weights", w.out_obs, "Observation weights CSV");

  EstimateOpts e;
  auto* estimate = app.add_subcommand("estimate", "Point estimate and permutation p-value");
  add_source(estimate, e.src, false);
  add_cov(estimate, e.cov);
  estimate->add_option("--setting", e.setting, "S1..S5")->capture_default_str();
  estimate->add_option("--estimand", e.estimand, "Estimand expression")->capture_default_str();
  estimate->add_option("--perms", e.perms, "Permutations (0 skips the test)")->capture_default_str();
  estimate->add_option("--seed", e.seed, "RNG seed")->capture_default_str();
  estimate->add_option("--sided", e.sided, "two | left | right")->capture_default_str();
  estimate->add_option("--workers", e.workers, "Worker threads")->capture_default_str();
  estimate->add_option("--vhat", e.vhat, "NJ x NJ outcome covariance for a plug-in variance");
  estimate->add_option("--out", e.out, "JSON output path (default stdout)");
  estimate->add_option("--out-draws", e.out_draws, "Permutation draws CSV");

  CompareOpts c;
  auto* compare = app.add_subcommand("compare", "Existing estimators as weights");
  add_source(compare, c.src, true);
  compare->add_option("--methods", c.methods, "Comma-separated methods")->capture_default_str();
  compare->add_option("--perms", c.perms, "Permutations (0 skips the test)")->capture_default_str();
  compare->add_option("--seed", c.seed, "RNG seed")->capture_default_str();
  compare->add_option("--workers", c.workers, "Worker threads")->capture_default_str();
  compare->add_option("--out", c.out, "CSV output path (default stdout)");
  compare->add_option("--weights-dir", c.weights_dir, "Directory for per-method weight CSVs");

  SimulateOpts s;
  auto* simulate = app.add_subcommand("simulate", "Stepped-wedge simulation study");
  simulate->add_option("--scenario", s.scenarios, "Scenario ids, e.g. 1..9 or 1,2,7")->capture_default_str();
  simulate->add_option("--sims", s.sims, "Replicates per scenario")->capture_default_str();
  simulate->add_option("--perms", s.perms, "Permutations per replicate")->capture_default_str();
  simulate->add_option("--seed", s.seed, "RNG seed")->capture_default_str();
  simulate->add_option("--workers", s.workers, "Worker threads")->capture_default_str();
  simulate->add_option("--entries", s.entries, "Registry entries (default: all applicable)");
  simulate->add_flag("--analytic", s.analytic, "Draw cell means directly");
  simulate->add_option("--out", s.out, "CSV output path (default stdout)");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& pe) {
    std::ostringstream o_out, o_err;
    const int code = app.exit(pe, o_out, o_err);
    out << o_out.str();
    err << o_err.str();
    return code == 0 ? kOk : kConfig;
  }

  const Io io{in, out, err};
  try {
    if (*design) return cmd_design(d, dry, io);
    if (*weights) return cmd_weights(w, dry, io);
    if (*estimate) return cmd_estimate(e, dry, io);
    if (*compare) return cmd_compare(c, dry, io);
    if (*simulate) return cmd_simulate(s, config->count() ? config->as<std::string>() : std::string(), dry, io);
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return status_for(ex.kind());
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kNumerical;
  }
  return kConfig;
}

}  // namespace gendid::cli
