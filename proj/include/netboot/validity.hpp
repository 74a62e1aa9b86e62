#pragma once

// Bootstrap exchangeability test, validity score and the Monte Carlo harness that runs the
// test over many (observed, bootstrap) pairs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "netboot/bootstrap.hpp"
#include "netboot/embed.hpp"
#include "netboot/error.hpp"
#include "netboot/graph.hpp"
#include "netboot/parallel.hpp"
#include "netboot/random.hpp"

namespace netboot {

struct ExchangeabilityResult {
  double p_value = 1.0;
  double t_obs = 0.0;
  std::vector<double> permuted_stats;  ///< T_2 .. T_{R+1}
  int R = 0;
  int d = 0;
};

/// || sum of block-1 rows - sum of block-2 rows ||_2 for a two-block embedding.
inline double displacement_statistic(const Embedding& Y) {
  detail::require(Y.block_count() == 2, "displacement statistic needs exactly two blocks");
  Y.validate();
  return (Y.block(0).colwise().sum() - Y.block(1).colwise().sum()).norm();
}

namespace detail {

/// Permutation null for the displacement statistic. Swapping rows i and i+n flips the sign
/// of D_i = Y_i - Y_{i+n}, so each permuted statistic is || sum_i s_i D_i || with i.i.d.
/// fair signs s_i.
inline ExchangeabilityResult permutation_test(const Eigen::MatrixXd& D, int R, std::uint64_t seed) {
  require(R >= 1, "permutation count R must be at least 1");
  ExchangeabilityResult out;
  out.R = R;
  out.d = static_cast<int>(D.cols());
  const Eigen::Index n = D.rows();
  out.t_obs = D.colwise().sum().norm();
  out.permuted_stats.resize(static_cast<std::size_t>(R));
  Rng rng(seed);
  Eigen::RowVectorXd sum(D.cols());
  std::size_t exceed = 1;  // T_1 = t_obs
  for (int r = 0; r < R; ++r) {
    sum.setZero();
    std::uint64_t bits = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i % 64 == 0) bits = rng.bits();
      if (bits & 1U)
        sum -= D.row(i);
      else
        sum += D.row(i);
      bits >>= 1U;
    }
    const double t = sum.norm();
    out.permuted_stats[static_cast<std::size_t>(r)] = t;
    exceed += t >= out.t_obs;
  }
  out.p_value = static_cast<double>(exceed) / static_cast<double>(R + 1);
  return out;
}

}  // namespace detail

/// Permutation test on an existing two-block joint embedding (UASE, dilated unfolding or
/// an external multi-network embedding).
inline ExchangeabilityResult exchangeability_test(const Embedding& Y, int R, std::uint64_t seed) {
  detail::require(Y.block_count() == 2, "exchangeability test needs a two-block embedding");
  Y.validate();
  return detail::permutation_test(Y.block(0) - Y.block(1), R, seed);
}

/// Joint UASE of (A, A_tilde) at dimension d followed by the permutation test.
inline ExchangeabilityResult exchangeability_test(const AdjacencyMatrix& A, const AdjacencyMatrix& A_tilde,
                                                  int d, int R, std::uint64_t seed,
                                                  const EmbedOptions& options = {}) {
  detail::require(A.n() == A_tilde.n(), "networks must share the node set");
  return exchangeability_test(uase({A, A_tilde}, d, options).embedding, R, seed);
}

// --- validity score ---------------------------------------------------------------

enum class Classification { Valid, Invalid, Conservative };

inline const char* to_string(Classification c) {
  switch (c) {
    case Classification::Valid: return "valid";
    case Classification::Invalid: return "invalid";
    case Classification::Conservative: return "conservative";
  }
  return "?";
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov test against U[0,1], asymptotic p-value with the
/// Stephens small-sample correction.
inline KsResult ks_uniform(std::vector<double> sample) {
  detail::require(!sample.empty(), "KS test needs at least one value");
  std::sort(sample.begin(), sample.end());
  const double m = static_cast<double>(sample.size());
  double D = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double x = std::clamp(sample[i], 0.0, 1.0);
    D = std::max({D, (static_cast<double>(i) + 1.0) / m - x, x - static_cast<double>(i) / m});
  }
  const double sq = std::sqrt(m);
  const double lambda = (sq + 0.12 + 0.11 / sq) * D;
  double p = 0.0;
  if (lambda < 1e-3) {
    p = 1.0;
  } else {
    for (int j = 1; j <= 200; ++j) {
      const double term = 2.0 * ((j % 2) ? 1.0 : -1.0) * std::exp(-2.0 * j * j * lambda * lambda);
      p += term;
      if (std::abs(term) < 1e-16) break;
    }
    p = std::clamp(p, 0.0, 1.0);
  }
  return {D, p};
}

struct ValidityReport {
  std::vector<double> p_values;  ///< trial order
  std::vector<double> sorted_p;
  std::vector<std::pair<double, double>> qq_pairs;  ///< (m/(M+1), sorted p)
  double score = 0.0;
  double mean_deviation = 0.0;  ///< mean(sorted p - q); positive means super-uniform
  Classification classification = Classification::Valid;
  double valid_threshold = 0.1;
  KsResult ks;
};

/// Bootstrap validity score: mean |p_(m) - m/(M+1)| over the sorted p-values.
inline ValidityReport validity_score(const std::vector<double>& p_values, double valid_threshold = 0.1) {
  detail::require(!p_values.empty(), "validity score needs at least one p-value");
  for (double p : p_values)
    detail::require(std::isfinite(p) && p >= 0.0 && p <= 1.0, "p-values must lie in [0, 1]");
  ValidityReport r;
  r.p_values = p_values;
  r.sorted_p = p_values;
  std::sort(r.sorted_p.begin(), r.sorted_p.end());
  const std::size_t M = p_values.size();
  double abs_sum = 0.0, signed_sum = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    const double q = static_cast<double>(i + 1) / static_cast<double>(M + 1);
    r.qq_pairs.emplace_back(q, r.sorted_p[i]);
    abs_sum += std::abs(r.sorted_p[i] - q);
    signed_sum += r.sorted_p[i] - q;
  }
  r.score = abs_sum / static_cast<double>(M);
  r.mean_deviation = signed_sum / static_cast<double>(M);
  r.valid_threshold = valid_threshold;
  if (r.score <= valid_threshold)
    r.classification = Classification::Valid;
  else
    r.classification = r.mean_deviation > 0.0 ? Classification::Conservative : Classification::Invalid;
  r.ks = ks_uniform(p_values);
  return r;
}

// --- harness ----------------------------------------------------------------------

/// Where the observed networks come from. The first three are synthetic models with a
/// known P; an AdjacencyMatrix is a fixed observed network (real-data mode).
using ValidationModel = std::variant<SbmSpec, MmsbmSpec, ProbabilityMatrix, AdjacencyMatrix>;

struct HarnessConfig {
  BootstrapConfig bootstrap;
  std::size_t M = 100;
  int R = 500;
  /// Test dimension; defaults to the bootstrap's d.
  std::optional<int> test_d;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  double valid_threshold = 0.1;
  EmbedOptions embed;

  int resolved_test_d() const {
    if (test_d) return *test_d;
    if (bootstrap.d) return *bootstrap.d;
    throw InvalidArgument("test dimension d is required when the bootstrap selects its own d");
  }
};

struct HarnessResult {
  ValidityReport report;
  std::vector<ExchangeabilityResult> trials;
};

/// Synthetic mode: trial m draws an observed network from the model, one bootstrap from
/// it, and tests the pair. Real-data mode: the estimator is fitted once on the fixed
/// network and each of M bootstraps is tested against it. Trials run in parallel; every
/// random draw is seeded from (seed, m), so results do not depend on the worker count.
inline HarnessResult run_validation_harness(const ValidationModel& model, const HarnessConfig& config) {
  detail::require(config.M >= 1, "M must be at least 1");
  detail::require(config.R >= 1, "R must be at least 1");
  const int d = config.resolved_test_d();

  std::optional<ProbabilityMatrix> fixed_p;
  std::optional<Resampler> real_data;
  if (const auto* sbm = std::get_if<SbmSpec>(&model)) {
    sbm->validate();
    fixed_p = sbm_probability_matrix(*sbm);
  } else if (const auto* mm = std::get_if<MmsbmSpec>(&model)) {
    mm->validate();
  } else if (const auto* P = std::get_if<ProbabilityMatrix>(&model)) {
    fixed_p = *P;
  } else {
    const auto& observed = std::get<AdjacencyMatrix>(model);
    detail::require(config.bootstrap.method != BootstrapMethod::TrueResample,
                    "true-resample needs a synthetic model");
    real_data.emplace(observed, config.bootstrap);
  }
  const std::size_t n = real_data ? std::get<AdjacencyMatrix>(model).n()
                        : fixed_p ? fixed_p->n()
                                  : std::get<MmsbmSpec>(model).n;
  detail::require(d >= 1 && static_cast<std::size_t>(d) <= n, "test dimension must satisfy 1 <= d <= n");

  HarnessResult result;
  result.trials.resize(config.M);
  parallel_for(config.M, config.workers, [&](std::size_t m) {
    const auto boot_seed = derive_seed(config.seed, m, Stream::Bootstrap);
    const auto perm_seed = derive_seed(config.seed, m, Stream::Permutation);
    if (real_data) {
      const auto& observed = std::get<AdjacencyMatrix>(model);
      result.trials[m] =
          exchangeability_test(observed, real_data->draw(boot_seed), d, config.R, perm_seed, config.embed);
      return;
    }
    AdjacencyMatrix observed;
    std::optional<ProbabilityMatrix> trial_p;
    if (fixed_p) {
      observed = sample_birg(*fixed_p, derive_seed(config.seed, m, Stream::Observed));
    } else {
      auto draw = sample_mmsbm(std::get<MmsbmSpec>(model), derive_seed(config.seed, m, Stream::Observed));
      observed = std::move(draw.adjacency);
      trial_p = std::move(draw.probabilities);
    }
    const Resampler resampler(observed, config.bootstrap, fixed_p ? &*fixed_p : &*trial_p);
    result.trials[m] =
        exchangeability_test(observed, resampler.draw(boot_seed), d, config.R, perm_seed, config.embed);
  });

  std::vector<double> p(config.M);
  for (std::size_t m = 0; m < config.M; ++m) p[m] = result.trials[m].p_value;
  result.report = validity_score(p, config.valid_threshold);
  return result;
}

/// Validity score as a function of the neighbour count k. Every k reuses the same seed,
/// so the observed networks are shared across the scan.
inline std::vector<std::pair<int, ValidityReport>> k_scan(const ValidationModel& model, HarnessConfig config,
                                                          const std::vector<int>& ks) {
  detail::require(!ks.empty(), "k scan needs at least one k");
  std::vector<std::pair<int, ValidityReport>> out;
  for (int k : ks) {
    config.bootstrap.k = k;
    out.emplace_back(k, run_validation_harness(model, config).report);
  }
  return out;
}

// --- export -----------------------------------------------------------------------

inline nlohmann::json to_json(const ValidityReport& r) {
  nlohmann::json j;
  j["p_values"] = r.p_values;
  j["score"] = r.score;
  j["mean_deviation"] = r.mean_deviation;
  j["classification"] = to_string(r.classification);
  j["valid_threshold"] = r.valid_threshold;
  j["ks_statistic"] = r.ks.statistic;
  j["ks_p_value"] = r.ks.p_value;
  return j;
}

/// Report with the run description: method, params, M, R, d, p_values, score,
/// classification.
inline nlohmann::json report_json(const ValidityReport& r, const HarnessConfig& config,
                                  const nlohmann::json& params = nlohmann::json::object()) {
  nlohmann::json j = to_json(r);
  j["method"] = to_string(config.bootstrap.method);
  j["params"] = params;
  j["M"] = config.M;
  j["R"] = config.R;
  j["d"] = config.resolved_test_d();
  j["seed"] = config.seed;
  return j;
}

inline void write_qq_csv(std::ostream& out, const ValidityReport& r) {
  out << "quantile,p_value\n" << std::setprecision(17);
  for (const auto& [q, p] : r.qq_pairs) out << q << ',' << p << '\n';
}

}  // namespace netboot
