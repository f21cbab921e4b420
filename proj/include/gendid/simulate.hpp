#pragma once

#include "gendid/assumptions.hpp"
#include "gendid/panel.hpp"
#include "gendid/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gendid {

enum class Heterogeneity { Homogeneous, Calendar, Exposure };

std::string to_string(Heterogeneity h);
Heterogeneity parse_heterogeneity(const std::string& s);

// Stepped-wedge generating model
//   mu_ij = mu + alpha_i + b_j + nu_ij + theta_ij X_ij,  Y_ijk ~ N(mu_ij, sigma_e^2)
// with the cell outcome the mean of n_per_cell individuals.
struct SimScenario {
  int id = 1;
  Heterogeneity heterogeneity = Heterogeneity::Homogeneous;
  // Homogeneous: one value. Calendar: periods 2..J. Exposure: a = 1..J-1.
  std::vector<double> theta{0.0};
  double mu = 0.30;
  std::vector<double> b{0, 0.08, 0.18, 0.29, 0.30, 0.27, 0.20, 0.13};
  double sigma_nu = 0.01;
  double sigma_e = 0.1;
  std::vector<double> cluster_pool{-0.016, -0.012, -0.011, -0.007, -0.005, -0.003, -0.001,
                                   0.0,    0.002,  0.003,  0.005,  0.008,  0.017,  0.020};
  int n_per_cell = 100;
  int units_per_sequence = 2;

  int n_periods() const { return static_cast<int>(b.size()); }
  int n_units() const { return static_cast<int>(cluster_pool.size()); }
  AdoptionPattern pattern() const;
  // theta_ij for a unit adopting at `adoption`, in period j (0 if untreated).
  double effect(int adoption, int period) const;
  // Throws ConfigError when the fields are inconsistent.
  void validate() const;
};

// Built-in scenarios 1..9: null, homogeneous, calendar- and exposure-varying effects.
SimScenario builtin_scenario(int id);

// One replicate. Clusters are assigned to sequences at random by shuffling the
// pool; `analytic` draws each cell mean directly from its exact distribution.
PanelData generate_swt(const SimScenario& s, rng::Engine& gen, bool analytic = false);
PanelData generate_swt(const SimScenario& s, std::uint64_t seed, bool analytic = false);

enum class EstimatorKind { GD, SA, ME };

struct RegistryEntry {
  std::string id;
  std::string label;
  EstimatorKind kind = EstimatorKind::GD;
  Setting setting = Setting::S5;  // GD only
  std::string estimand;           // GD only
  std::string method;             // SA comparator name
  Setting target_setting = Setting::S5;
  std::string target;  // estimand the entry is judged against
};

// Overall (O1..O21) and period-specific (P1..P15) rows; ME rows are listed
// but cannot be run.
const std::vector<RegistryEntry>& registry();
const RegistryEntry& registry_entry(const std::string& id);
// Runnable entries whose target suits the scenario's heterogeneity.
std::vector<std::string> default_entries(const SimScenario& s);

// Value of the entry's target when effects follow the scenario; each effect key
// takes the mean of the cell effects it covers.
double target_value(const RegistryEntry& e, const SimScenario& s);

struct StudyRow {
  int scenario = 0;
  std::string entry;
  std::string label;
  double mean = 0.0;
  double sd = 0.0;
  double power = 0.0;
  int n_sims = 0;
  int n_perm = 0;
  double truth = 0.0;
};

struct StudyOptions {
  int n_sims = 1000;
  int n_perm = 250;
  std::uint64_t seed = 7;
  int workers = 1;
  double alpha = 0.05;
  bool analytic = false;
  // Empty means default_entries per scenario.
  std::vector<std::string> entries;
};

std::vector<StudyRow> run_study(const std::vector<SimScenario>& scenarios, const StudyOptions& opts);

}  // namespace gendid
