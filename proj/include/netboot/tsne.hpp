#pragma once

// Exact t-SNE for desk-scale graphs (rows of the adjacency matrix as features) and the
// perplexity scan that picks the layout with the smallest fuzziness score.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "netboot/embed.hpp"
#include "netboot/error.hpp"
#include "netboot/graph.hpp"
#include "netboot/random.hpp"
#include "netboot/uncertainty.hpp"

namespace netboot {

struct TsneOptions {
  double perplexity = 30.0;
  int iterations = 1000;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch = 250;
  /// Step size; 0 selects n / 12.
  double learning_rate = 0.0;
  /// Target entropy tolerance of the bandwidth search (nats).
  double entropy_tolerance = 1e-5;
  std::uint64_t seed = 0;
  bool record_kl = false;
};

struct TsneResult {
  Eigen::MatrixXd embedding;     ///< n x 2, unstandardized
  std::vector<double> kl_history;  ///< per iteration, against the unexaggerated P
};

struct RowAffinity {
  std::vector<double> p;  ///< conditional probabilities, p[i] unused for self
  double beta = 1.0;
  double entropy = 0.0;
};

/// Conditional affinities p_{j|i} proportional to exp(-beta d2_j) over j != self, with
/// beta found by bisection so the entropy equals log(perplexity).
inline RowAffinity calibrate_row(const std::vector<double>& dist2, std::size_t self, double perplexity,
                                 double tolerance = 1e-5, int max_steps = 200) {
  const std::size_t n = dist2.size();
  detail::require(n >= 2, "need at least two points");
  const double target = std::log(perplexity);
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  RowAffinity row;
  row.p.assign(n, 0.0);
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j)
    if (j != self) dmin = std::min(dmin, dist2[j]);

  for (int step = 0; step < max_steps; ++step) {
    // Shift by the smallest distance so the largest weight is exactly 1.
    double sum = 0.0, weighted = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == self) continue;
      const double w = std::exp(-row.beta * (dist2[j] - dmin));
      row.p[j] = w;
      sum += w;
      weighted += w * (dist2[j] - dmin);
    }
    row.entropy = std::log(sum) + row.beta * weighted / sum;
    for (std::size_t j = 0; j < n; ++j) row.p[j] /= sum;
    const double diff = row.entropy - target;
    if (std::abs(diff) < tolerance) break;
    if (diff > 0) {
      lo = row.beta;
      row.beta = std::isinf(hi) ? row.beta * 2.0 : 0.5 * (row.beta + hi);
    } else {
      hi = row.beta;
      row.beta = std::isinf(lo) ? row.beta / 2.0 : 0.5 * (row.beta + lo);
    }
  }
  row.p[self] = 0.0;
  return row;
}

/// Symmetrized joint affinities P = (P_cond + P_cond^T) / (2n) from squared distances.
inline Eigen::MatrixXd joint_affinities(const Eigen::MatrixXd& dist2, double perplexity, double tolerance = 1e-5) {
  const auto n = dist2.rows();
  Eigen::MatrixXd cond(n, n);
  std::vector<double> row(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = dist2(i, j);
    const auto cal = calibrate_row(row, static_cast<std::size_t>(i), perplexity, tolerance);
    for (Eigen::Index j = 0; j < n; ++j) cond(i, j) = cal.p[static_cast<std::size_t>(j)];
  }
  Eigen::MatrixXd P = (cond + cond.transpose()) / (2.0 * static_cast<double>(n));
  P /= P.sum();
  return P;
}

/// Exact t-SNE from a matrix of pairwise squared distances.
inline TsneResult tsne(const Eigen::MatrixXd& dist2, const TsneOptions& options) {
  const auto n = dist2.rows();
  detail::require(dist2.cols() == n, "distance matrix must be square");
  detail::require(n >= 4, "t-SNE needs at least 4 points");
  detail::require(options.perplexity > 1.0 && options.perplexity < static_cast<double>(n),
                  "perplexity must satisfy 1 < perplexity < n");
  detail::require(options.iterations >= 1, "t-SNE needs at least one iteration");

  const Eigen::MatrixXd P = joint_affinities(dist2, options.perplexity, options.entropy_tolerance);
  const double eta = options.learning_rate > 0.0 ? options.learning_rate : static_cast<double>(n) / 12.0;

  Rng rng(derive_seed(options.seed, 0, Stream::Layout));
  Eigen::MatrixXd Y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < 2; ++c) Y(i, c) = 1e-4 * rng.normal();

  Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(n, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
  Eigen::MatrixXd num(n, n);
  Eigen::MatrixXd grad(n, 2);
  TsneResult result;

  for (int it = 0; it < options.iterations; ++it) {
    const double exaggeration = it < options.exaggeration_iterations ? options.early_exaggeration : 1.0;
    const double momentum = it < options.momentum_switch ? options.initial_momentum : options.final_momentum;

    double z = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      num(j, j) = 0.0;
      for (Eigen::Index i = j + 1; i < n; ++i) {
        const double dx = Y(i, 0) - Y(j, 0), dy = Y(i, 1) - Y(j, 1);
        const double v = 1.0 / (1.0 + dx * dx + dy * dy);
        num(i, j) = v;
        num(j, i) = v;
        z += 2.0 * v;
      }
    }
    if (options.record_kl) {
      double kl = 0.0;
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i)
          if (P(i, j) > 0.0) kl += P(i, j) * std::log(P(i, j) / std::max(num(i, j) / z, 1e-300));
      result.kl_history.push_back(kl);
    }
    grad.setZero();
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i) {
        if (i == j) continue;
        const double w = (exaggeration * P(i, j) - num(i, j) / z) * num(i, j);
        grad(i, 0) += w * (Y(i, 0) - Y(j, 0));
        grad(i, 1) += w * (Y(i, 1) - Y(j, 1));
      }
    grad *= 4.0;

    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index c = 0; c < 2; ++c) {
        const bool same_sign = (grad(i, c) > 0.0) == (velocity(i, c) > 0.0);
        gains(i, c) = same_sign ? std::max(gains(i, c) * 0.8, 0.01) : gains(i, c) + 0.2;
        velocity(i, c) = momentum * velocity(i, c) - eta * gains(i, c) * grad(i, c);
        Y(i, c) += velocity(i, c);
      }
    Y.rowwise() -= Y.colwise().mean();
  }
  if (!Y.allFinite()) throw NumericalError("t-SNE diverged");
  result.embedding = std::move(Y);
  return result;
}

/// Squared Euclidean distances between adjacency rows: deg_i + deg_j - 2 |N(i) ∩ N(j)|.
inline Eigen::MatrixXd adjacency_row_distances(const AdjacencyMatrix& A) {
  const Eigen::MatrixXd common = detail::unfolding_gram({A});
  const auto n = static_cast<Eigen::Index>(A.n());
  Eigen::MatrixXd d2(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) d2(i, j) = common(i, i) + common(j, j) - 2.0 * common(i, j);
  return d2;
}

/// Standardized t-SNE layout of the adjacency rows.
inline Layout2D tsne_layout(const AdjacencyMatrix& A, const TsneOptions& options) {
  return Layout2D::standardize(tsne(adjacency_row_distances(A), options).embedding, LayoutSource::TsneInternal);
}

inline Layout2D tsne_layout(const AdjacencyMatrix& A, double perplexity, std::uint64_t seed, int iterations = 1000) {
  TsneOptions options;
  options.perplexity = perplexity;
  options.seed = seed;
  options.iterations = iterations;
  return tsne_layout(A, options);
}

struct PerplexityScore {
  double perplexity = 0.0;
  double score = 0.0;
  bool argmin = false;
};

/// Fuzziness score of the t-SNE layout at each perplexity, sorted by perplexity, with the
/// smallest score flagged (first one on ties). All layouts share the seed in `base`.
inline std::vector<PerplexityScore> perplexity_scan(const AdjacencyMatrix& A, const FuzzinessMatrix& F,
                                                    std::vector<double> perplexities,
                                                    const TsneOptions& base = {}) {
  detail::require(!perplexities.empty(), "perplexity scan needs at least one value");
  detail::require(F.n() == A.n(), "fuzziness matrix size must match the graph");
  std::sort(perplexities.begin(), perplexities.end());
  const Eigen::MatrixXd d2 = adjacency_row_distances(A);
  std::vector<PerplexityScore> out;
  for (double perplexity : perplexities) {
    TsneOptions options = base;
    options.perplexity = perplexity;
    const auto layout = Layout2D::standardize(tsne(d2, options).embedding, LayoutSource::TsneInternal);
    out.push_back({perplexity, fuzziness_score(layout, F), false});
  }
  auto best = std::min_element(out.begin(), out.end(),
                               [](const auto& a, const auto& b) { return a.score < b.score; });
  best->argmin = true;
  return out;
}

inline std::vector<PerplexityScore> perplexity_scan(const AdjacencyMatrix& A, const NodeUncertainty& unc,
                                                    const std::vector<double>& perplexities,
                                                    const TsneOptions& base = {}, double sd_threshold = 3.0) {
  return perplexity_scan(A, fuzziness_matrix(unc, sd_threshold), perplexities, base);
}

}  // namespace netboot
