#include "gendid/estimate.hpp"

#include "gendid/covariance.hpp"
#include "gendid/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace gendid {

std::string to_string(Sided s) {
  switch (s) {
    case Sided::Two: return "two";
    case Sided::Left: return "left";
    case Sided::Right: return "right";
  }
  return {};
}

Sided parse_sided(const std::string& s) {
  if (s == "two" || s == "two-sided") return Sided::Two;
  if (s == "left" || s == "less") return Sided::Left;
  if (s == "right" || s == "greater") return Sided::Right;
  throw ConfigError("unknown sidedness '" + s + "' (expected two|left|right)");
}

double point_estimate(const Vector& obs_weights, const PanelData& panel) {
  const Index NJ = static_cast<Index>(panel.n_units()) * panel.n_periods();
  if (obs_weights.size() != NJ)
    throw DimensionError("observation weights have length " + std::to_string(obs_weights.size()) +
                         ", panel has NJ=" + std::to_string(NJ));
  return obs_weights.dot(panel.y());
}

double point_estimate(const WeightSolution& sol, const PanelData& panel) {
  return point_estimate(sol.obs_weights, panel);
}

double permutation_p_value(double observed, const std::vector<double>& draws, Sided sided,
                           double tol) {
  std::size_t hits = 0;
  for (double d : draws) {
    switch (sided) {
      case Sided::Two: hits += std::abs(d) >= std::abs(observed) - tol; break;
      case Sided::Left: hits += d <= observed + tol; break;
      case Sided::Right: hits += d >= observed - tol; break;
    }
  }
  return (1.0 + static_cast<double>(hits)) / (1.0 + static_cast<double>(draws.size()));
}

EstimateResult permutation_test(const Vector& obs_weights, const PanelData& panel,
                                const PermutationOptions& opts) {
  if (opts.n_perm < 1) throw ConfigError("number of permutations must be at least 1");
  if (panel.pattern.distinct_adoption_times() < 2)
    throw DegenerateDesignError("all units share one adoption time; permutations are trivial");
  const int N = panel.n_units();
  const int J = panel.n_periods();
  EstimateResult res;
  res.point = point_estimate(obs_weights, panel);
  if (panel.transform != Transform::Identity)
    res.back_transformed = back_transform(res.point, panel.transform);
  res.n_perm = opts.n_perm;
  res.seed = opts.seed;

  // Row i of `wmat` holds unit i's weights.
  const Matrix wmat = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                     Eigen::RowMajor>>(obs_weights.data(), N, J);
  const Matrix& y = panel.outcomes;
  std::vector<double> draws(static_cast<std::size_t>(opts.n_perm));
  auto run = [&](int begin, int end) {
    std::vector<int> perm(static_cast<std::size_t>(N));
    for (int r = begin; r < end; ++r) {
      std::iota(perm.begin(), perm.end(), 0);
      auto gen = rng::stream(opts.seed, static_cast<std::uint64_t>(r));
      rng::shuffle(perm, gen);
      double s = 0.0;
      for (int i = 0; i < N; ++i) s += wmat.row(i).dot(y.row(perm[static_cast<std::size_t>(i)]));
      draws[static_cast<std::size_t>(r)] = s;
    }
  };
  const int workers = std::clamp(opts.workers, 1, opts.n_perm);
  if (workers == 1) {
    run(0, opts.n_perm);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (opts.n_perm + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int b = w * chunk;
      const int e = std::min(opts.n_perm, b + chunk);
      if (b < e) pool.emplace_back(run, b, e);
    }
    for (auto& t : pool) t.join();
  }

  const double scale = obs_weights.cwiseAbs().sum() * std::max(1.0, y.cwiseAbs().maxCoeff());
  res.perm_p = permutation_p_value(res.point, draws, opts.sided, 1e-10 * scale);
  if (opts.keep_draws) res.null_draws = std::move(draws);
  return res;
}

EstimateResult permutation_test(const WeightSolution& sol, const PanelData& panel,
                                const PermutationOptions& opts) {
  return permutation_test(sol.obs_weights, panel, opts);
}

double plug_in_variance(const Vector& obs_weights, const Matrix& vhat) {
  if (vhat.rows() != vhat.cols() || vhat.rows() != obs_weights.size())
    throw CovarianceParamError("variance matrix is " + std::to_string(vhat.rows()) + "x" +
                               std::to_string(vhat.cols()) + ", expected " +
                               std::to_string(obs_weights.size()));
  if (!vhat.allFinite()) throw CovarianceParamError("variance matrix has non-finite entries");
  const double scale = std::max(1.0, vhat.cwiseAbs().maxCoeff());
  if ((vhat - vhat.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw CovarianceParamError("variance matrix is not symmetric");
  if (!is_psd(vhat)) throw CovarianceParamError("variance matrix is not positive semidefinite");
  return std::max(0.0, obs_weights.dot(vhat * obs_weights));
}

double back_transform(double point, Transform t) {
  return t == Transform::Identity ? point : std::exp(point);
}

}  // namespace gendid
