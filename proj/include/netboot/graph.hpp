#pragma once

// Graph data types and random graph generators: binary inhomogeneous random graphs,
// stochastic block models and mixed-membership stochastic block models.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "netboot/error.hpp"
#include "netboot/random.hpp"

namespace netboot {

using NodeIndex = std::int32_t;

struct Edge {
  NodeIndex u;
  NodeIndex v;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Undirected simple graph: symmetric, binary, zero diagonal. Stored as sorted
/// neighbour lists (CSR); a dense copy is materialized on request.
class AdjacencyMatrix {
 public:
  AdjacencyMatrix() = default;

  /// Empty graph on n nodes.
  explicit AdjacencyMatrix(std::size_t n) : n_(n), offsets_(n + 1, 0) {}

  /// Builds from an edge list. Each pair is symmetrized and duplicates collapse.
  /// Self-loops and out-of-range endpoints are rejected.
  static AdjacencyMatrix from_edges(std::size_t n, std::span<const Edge> edges) {
    std::vector<std::vector<NodeIndex>> lists(n);
    for (const auto& e : edges) {
      detail::require(e.u >= 0 && e.v >= 0 && static_cast<std::size_t>(e.u) < n &&
                          static_cast<std::size_t>(e.v) < n,
                      "edge endpoint out of range");
      detail::require(e.u != e.v, "self-loop in edge list");
      lists[e.u].push_back(e.v);
      lists[e.v].push_back(e.u);
    }
    return from_lists(std::move(lists));
  }

  /// Builds from a dense 0/1 matrix; validates symmetry, binary entries and zero diagonal.
  static AdjacencyMatrix from_dense(const Eigen::MatrixXd& dense) {
    detail::require(dense.rows() == dense.cols(), "adjacency matrix must be square");
    const auto n = static_cast<std::size_t>(dense.rows());
    std::vector<std::vector<NodeIndex>> lists(n);
    for (std::size_t i = 0; i < n; ++i) {
      detail::require(dense(i, i) == 0.0, "adjacency diagonal must be zero");
      for (std::size_t j = 0; j < n; ++j) {
        const double a = dense(i, j);
        detail::require(a == 0.0 || a == 1.0, "adjacency entries must be 0 or 1");
        detail::require(a == dense(j, i), "adjacency matrix must be symmetric");
        if (a == 1.0) lists[i].push_back(static_cast<NodeIndex>(j));
      }
    }
    return from_lists(std::move(lists));
  }

  std::size_t n() const { return n_; }
  std::size_t edge_count() const { return neighbors_.size() / 2; }

  std::span<const NodeIndex> neighbors(std::size_t i) const {
    return {neighbors_.data() + offsets_[i], neighbors_.data() + offsets_[i + 1]};
  }
  std::size_t degree(std::size_t i) const { return offsets_[i + 1] - offsets_[i]; }

  bool has_edge(std::size_t i, std::size_t j) const {
    const auto row = neighbors(i);
    return std::binary_search(row.begin(), row.end(), static_cast<NodeIndex>(j));
  }

  /// Upper-triangle edges (u < v) in lexicographic order.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(edge_count());
    for (std::size_t i = 0; i < n_; ++i)
      for (NodeIndex j : neighbors(i))
        if (static_cast<std::size_t>(j) > i) out.push_back({static_cast<NodeIndex>(i), j});
    return out;
  }

  /// Fraction of the n(n-1)/2 off-diagonal pairs that are edges.
  double density() const {
    if (n_ < 2) return 0.0;
    return static_cast<double>(edge_count()) / (0.5 * static_cast<double>(n_) * (n_ - 1));
  }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_, n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (NodeIndex j : neighbors(i)) out(i, j) = 1.0;
    return out;
  }

  /// A x for a block of column vectors x (n x c).
  Eigen::MatrixXd multiply(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n_, x.cols());
    for (std::size_t i = 0; i < n_; ++i)
      for (NodeIndex j : neighbors(i)) y.row(i) += x.row(j);
    return y;
  }

  /// A x for a single vector.
  Eigen::VectorXd multiply(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      double s = 0.0;
      for (NodeIndex j : neighbors(i)) s += x(j);
      y(i) = s;
    }
    return y;
  }

  const std::optional<std::vector<std::string>>& node_labels() const { return labels_; }

  /// Attaches node labels (length n, unique).
  AdjacencyMatrix with_labels(std::vector<std::string> labels) const {
    detail::require(labels.size() == n_, "node label count must equal n");
    std::unordered_set<std::string> seen(labels.begin(), labels.end());
    detail::require(seen.size() == labels.size(), "node labels must be unique");
    AdjacencyMatrix copy = *this;
    copy.labels_ = std::move(labels);
    return copy;
  }

  /// Structural equality (labels ignored).
  friend bool operator==(const AdjacencyMatrix& a, const AdjacencyMatrix& b) {
    return a.n_ == b.n_ && a.offsets_ == b.offsets_ && a.neighbors_ == b.neighbors_;
  }

 private:
  static AdjacencyMatrix from_lists(std::vector<std::vector<NodeIndex>> lists) {
    AdjacencyMatrix g(lists.size());
    std::size_t total = 0;
    for (auto& row : lists) {
      std::sort(row.begin(), row.end());
      row.erase(std::unique(row.begin(), row.end()), row.end());
      total += row.size();
    }
    g.neighbors_.reserve(total);
    for (std::size_t i = 0; i < lists.size(); ++i) {
      g.neighbors_.insert(g.neighbors_.end(), lists[i].begin(), lists[i].end());
      g.offsets_[i + 1] = g.neighbors_.size();
    }
    return g;
  }

  std::size_t n_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeIndex> neighbors_;
  std::optional<std::vector<std::string>> labels_;
};

/// Edge-probability matrix with entries in [0, 1].
class ProbabilityMatrix {
 public:
  ProbabilityMatrix() = default;

  explicit ProbabilityMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
    detail::require(values_.rows() == values_.cols(), "probability matrix must be square");
    for (Eigen::Index j = 0; j < values_.cols(); ++j)
      for (Eigen::Index i = 0; i < values_.rows(); ++i) {
        const double p = values_(i, j);
        detail::require(std::isfinite(p), "probability matrix has a non-finite entry");
        detail::require(p >= 0.0 && p <= 1.0, "probability matrix entry outside [0, 1]");
      }
  }

  std::size_t n() const { return static_cast<std::size_t>(values_.rows()); }
  const Eigen::MatrixXd& values() const { return values_; }
  double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }

  bool is_symmetric() const { return values_ == values_.transpose(); }

  /// Mean over the off-diagonal upper triangle.
  double mean_off_diagonal() const {
    const std::size_t n = this->n();
    if (n < 2) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) sum += values_(i, j);
    return sum / (0.5 * static_cast<double>(n) * (n - 1));
  }

 private:
  Eigen::MatrixXd values_;
};

/// Stochastic block model. Community labels are 0-based.
struct SbmSpec {
  Eigen::MatrixXd block_matrix;
  std::vector<int> communities;

  std::size_t n() const { return communities.size(); }
  int community_count() const { return static_cast<int>(block_matrix.rows()); }

  void validate() const {
    detail::require(block_matrix.rows() == block_matrix.cols() && block_matrix.rows() > 0,
                    "block matrix must be square and non-empty");
    detail::require(block_matrix == block_matrix.transpose(), "block matrix must be symmetric");
    detail::require((block_matrix.array() >= 0.0).all() && (block_matrix.array() <= 1.0).all(),
                    "block matrix entries must lie in [0, 1]");
    for (int c : communities)
      detail::require(c >= 0 && c < community_count(), "community index out of range");
  }

  /// Assigns each of n nodes to a community uniformly at random.
  static SbmSpec with_random_assignment(Eigen::MatrixXd block_matrix, std::size_t n,
                                        std::uint64_t seed) {
    SbmSpec spec{std::move(block_matrix), std::vector<int>(n)};
    Rng rng(derive_seed(seed, 0, Stream::Assignment));
    const auto c = static_cast<std::uint64_t>(spec.block_matrix.rows());
    for (auto& t : spec.communities) t = static_cast<int>(rng.below(c));
    return spec;
  }
};

/// Mixed-membership stochastic block model.
struct MmsbmSpec {
  std::size_t n = 0;
  Eigen::VectorXd alpha;
  Eigen::MatrixXd block_matrix;

  int community_count() const { return static_cast<int>(alpha.size()); }

  void validate() const {
    detail::require(n > 0, "MMSBM needs at least one node");
    detail::require(alpha.size() > 0, "Dirichlet concentration must be non-empty");
    detail::require((alpha.array() > 0.0).all() && alpha.allFinite(),
                    "Dirichlet concentrations must be positive and finite");
    detail::require(block_matrix.rows() == alpha.size() && block_matrix.cols() == alpha.size(),
                    "block matrix must be C x C");
    detail::require(block_matrix == block_matrix.transpose(), "block matrix must be symmetric");
    detail::require((block_matrix.array() >= 0.0).all() && (block_matrix.array() <= 1.0).all(),
                    "block matrix entries must lie in [0, 1]");
  }
};

/// Independent Bernoulli draw of each upper-triangle pair, mirrored; diagonal never sampled.
inline AdjacencyMatrix sample_birg(const ProbabilityMatrix& P, std::uint64_t seed) {
  const std::size_t n = P.n();
  Rng rng(seed);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.bernoulli(P(i, j)))
        edges.push_back({static_cast<NodeIndex>(i), static_cast<NodeIndex>(j)});
  return AdjacencyMatrix::from_edges(n, edges);
}

/// P_ij = B[tau_i, tau_j]. The diagonal keeps B[tau_i, tau_i]; samplers ignore it.
inline ProbabilityMatrix sbm_probability_matrix(const SbmSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n();
  Eigen::MatrixXd P(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i)
      P(i, j) = spec.block_matrix(spec.communities[i], spec.communities[j]);
  return ProbabilityMatrix(std::move(P));
}

struct MmsbmSample {
  AdjacencyMatrix adjacency;
  /// Realized pair probabilities z_{i->j}^T B z_{j->i}; zero diagonal.
  ProbabilityMatrix probabilities;
  /// n x C membership vectors pi_i.
  Eigen::MatrixXd memberships;
};

namespace detail {

inline Eigen::VectorXd sample_dirichlet(Rng& rng, const Eigen::VectorXd& alpha) {
  const Eigen::Index c = alpha.size();
  Eigen::VectorXd logs(c);
  for (Eigen::Index k = 0; k < c; ++k) logs(k) = rng.log_gamma(alpha(k));
  const double top = logs.maxCoeff();
  Eigen::VectorXd w = (logs.array() - top).exp();
  return w / w.sum();
}

inline int sample_categorical(Rng& rng, const Eigen::VectorXd& weights) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < weights.size(); ++k) {
    acc += weights(k);
    if (u < acc) return static_cast<int>(k);
  }
  // Rounding left u above the cumulative sum: return the last category with mass.
  for (Eigen::Index k = weights.size() - 1; k > 0; --k)
    if (weights(k) > 0.0) return static_cast<int>(k);
  return 0;
}

}  // namespace detail

/// One MMSBM draw. Membership indicators are drawn once per unordered pair i < j: the
/// initiator's from pi_i and the receiver's from pi_j, and the edge is mirrored.
inline MmsbmSample sample_mmsbm(const MmsbmSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t n = spec.n;
  Rng rng(seed);
  Eigen::MatrixXd pi(n, spec.community_count());
  for (std::size_t i = 0; i < n; ++i) pi.row(i) = detail::sample_dirichlet(rng, spec.alpha);

  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd pi_i = pi.row(i).transpose();
    for (std::size_t j = i + 1; j < n; ++j) {
      const int g = detail::sample_categorical(rng, pi_i);
      const int h = detail::sample_categorical(rng, pi.row(j).transpose());
      const double p = spec.block_matrix(g, h);
      P(i, j) = p;
      P(j, i) = p;
      if (rng.bernoulli(p)) edges.push_back({static_cast<NodeIndex>(i), static_cast<NodeIndex>(j)});
    }
  }
  return {AdjacencyMatrix::from_edges(n, edges), ProbabilityMatrix(std::move(P)), std::move(pi)};
}

/// Block matrix of the 3-community mixed-membership example.
inline Eigen::MatrixXd mmsbm_example_block_matrix() {
  Eigen::MatrixXd B(3, 3);
  B << 0.3, 0.2, 0.2,
       0.2, 0.6, 0.2,
       0.2, 0.2, 0.9;
  return B;
}

/// Block matrix of the 4-community SBM example.
inline Eigen::MatrixXd sbm4_example_block_matrix() {
  Eigen::MatrixXd B(4, 4);
  B << 0.7, 0.4, 0.2, 0.5,
       0.4, 0.6, 0.3, 0.2,
       0.2, 0.3, 0.8, 0.4,
       0.5, 0.2, 0.4, 0.9;
  return B;
}

}  // namespace netboot
