#pragma once

// Network bootstraps from a single observed graph: probability-matrix estimators
// (nearest-neighbour smoothing of an embedding, clipped X X^T) followed by independent
// Bernoulli resampling, and edge-list resampling baselines.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "netboot/embed.hpp"
#include "netboot/error.hpp"
#include "netboot/fileio.hpp"
#include "netboot/graph.hpp"
#include "netboot/graph_io.hpp"
#include "netboot/knn.hpp"
#include "netboot/parallel.hpp"
#include "netboot/random.hpp"

namespace netboot {

enum class BootstrapMethod {
  AseKnn,       ///< kNN smoothing in an adjacency spectral embedding
  ExternalKnn,  ///< kNN smoothing in a user-supplied embedding
  Xxt,          ///< clipped ASE outer product
  Eswr,         ///< edge-list sampling with replacement
  EswrPlus,     ///< ESWR topped up with uniformly chosen non-edges
  TrueResample, ///< resample from the known generating P (reference, synthetic only)
  Identity,     ///< the observed graph itself (degenerate reference)
};

inline const char* to_string(BootstrapMethod m) {
  switch (m) {
    case BootstrapMethod::AseKnn: return "ase-knn";
    case BootstrapMethod::ExternalKnn: return "external-knn";
    case BootstrapMethod::Xxt: return "xxt";
    case BootstrapMethod::Eswr: return "eswr";
    case BootstrapMethod::EswrPlus: return "eswr-plus";
    case BootstrapMethod::TrueResample: return "true-resample";
    case BootstrapMethod::Identity: return "identity";
  }
  return "?";
}

inline BootstrapMethod parse_bootstrap_method(const std::string& s) {
  for (auto m : {BootstrapMethod::AseKnn, BootstrapMethod::ExternalKnn, BootstrapMethod::Xxt,
                 BootstrapMethod::Eswr, BootstrapMethod::EswrPlus, BootstrapMethod::TrueResample,
                 BootstrapMethod::Identity})
    if (s == to_string(m)) return m;
  throw InvalidArgument("unknown bootstrap method '" + s + "'");
}

inline bool uses_phat(BootstrapMethod m) {
  return m == BootstrapMethod::AseKnn || m == BootstrapMethod::ExternalKnn ||
         m == BootstrapMethod::Xxt || m == BootstrapMethod::TrueResample;
}

struct BootstrapBatch {
  std::vector<AdjacencyMatrix> replicates;
  BootstrapMethod estimator = BootstrapMethod::AseKnn;
  std::optional<ProbabilityMatrix> phat;
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> seeds;  ///< per-replicate derived seeds
};

/// Row-wise kNN average before symmetrization: row i is the mean of the adjacency rows
/// of node i's k-neighbourhood (node i included).
inline Eigen::MatrixXd knn_phat_raw(const AdjacencyMatrix& A, const Embedding& emb, int k,
                                    const KnnOptions& options = {}) {
  const std::size_t n = A.n();
  detail::require(static_cast<std::size_t>(emb.rows()) == n,
                  "embedding rows must match the number of nodes");
  detail::require(k > 1 && static_cast<std::size_t>(k) <= n, "k must satisfy 1 < k <= n");
  emb.validate();
  const auto hoods = nearest_neighbours(emb.positions, k, options);
  Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(n, n);
  const double w = 1.0 / k;
  for (std::size_t i = 0; i < n; ++i)
    for (NodeIndex j : hoods[i])
      for (NodeIndex c : A.neighbors(j)) raw(i, c) += w;
  return raw;
}

/// kNN probability estimate, symmetrized as (P + P^T) / 2 with a zero diagonal.
inline ProbabilityMatrix knn_phat(const AdjacencyMatrix& A, const Embedding& emb, int k,
                                  const KnnOptions& options = {}) {
  const Eigen::MatrixXd raw = knn_phat_raw(A, emb, k, options);
  const auto n = raw.rows();
  Eigen::MatrixXd P(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      P(i, j) = i == j ? 0.0 : std::min(1.0, 0.5 * (raw(i, j) + raw(j, i)));
  return ProbabilityMatrix(std::move(P));
}

/// clip(X X^T, 0, 1) with the diagonal zeroed.
inline ProbabilityMatrix clipped_outer_product(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd P = (X * X.transpose()).cwiseMax(0.0).cwiseMin(1.0);
  P.diagonal().setZero();
  // Symmetric by construction up to rounding in the product; mirror the upper triangle.
  P.triangularView<Eigen::StrictlyLower>() = P.transpose();
  return ProbabilityMatrix(std::move(P));
}

inline ProbabilityMatrix xxt_phat(const AdjacencyMatrix& A, int d, const EmbedOptions& options = {}) {
  return clipped_outer_product(ase(A, d, options).embedding.positions);
}

/// Embedding used for ASE-kNN. An explicit d uses the square-root scaling; without one, d
/// is chosen by the scree elbow over `scree_size` eigenvalues and the full-sigma scaling is
/// used, since it tolerates a mis-estimated d better.
inline Embedding ase_knn_embedding(const AdjacencyMatrix& A, std::optional<int> d,
                                   const EmbedOptions& options = {}, int scree_size = 0) {
  if (d) return ase(A, *d, options).embedding;
  const int count = scree_size > 0 ? std::min<int>(scree_size, static_cast<int>(A.n()))
                                   : std::min<int>(static_cast<int>(A.n()), 50);
  detail::require(count >= 3, "automatic dimension selection needs at least 3 nodes");
  const int chosen = select_dimension_elbow(adjacency_spectrum(A, count, options));
  return ase_alternative_scaling(A, chosen, options).embedding;
}

namespace detail {

inline std::vector<std::uint64_t> replicate_seeds(std::uint64_t master, std::size_t B) {
  std::vector<std::uint64_t> seeds(B);
  for (std::size_t b = 0; b < B; ++b) seeds[b] = derive_seed(master, b, Stream::Replicate);
  return seeds;
}

inline std::uint64_t pair_key(NodeIndex u, NodeIndex v) {
  if (u > v) std::swap(u, v);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) |
         static_cast<std::uint32_t>(v);
}

inline std::vector<Edge> eswr_edges(const std::vector<Edge>& edges, Rng& rng) {
  std::vector<Edge> out(edges.size());
  for (auto& e : out) e = edges[rng.below(edges.size())];
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace detail

/// B independent Bernoulli draws from phat; replicate b uses a seed derived from (seed, b).
inline BootstrapBatch sample_bootstraps(const ProbabilityMatrix& phat, std::size_t B,
                                        std::uint64_t seed, std::size_t workers = 1,
                                        BootstrapMethod tag = BootstrapMethod::AseKnn) {
  BootstrapBatch batch;
  batch.estimator = tag;
  batch.phat = phat;
  batch.master_seed = seed;
  batch.seeds = detail::replicate_seeds(seed, B);
  batch.replicates.resize(B);
  parallel_for(B, workers, [&](std::size_t b) { batch.replicates[b] = sample_birg(phat, batch.seeds[b]); });
  return batch;
}

/// One ESWR replicate: |E| edges drawn with replacement from E, duplicates removed.
inline AdjacencyMatrix eswr_replicate(const AdjacencyMatrix& A, std::uint64_t seed) {
  const auto edges = A.edges();
  detail::require(!edges.empty(), "edge-list bootstrap needs at least one edge");
  Rng rng(seed);
  return AdjacencyMatrix::from_edges(A.n(), detail::eswr_edges(edges, rng));
}

/// One ESWR+edges replicate: ESWR, then |E| - |E~| pairs drawn uniformly without
/// replacement from the pairs not already in E~, so the replicate has exactly |E| edges.
inline AdjacencyMatrix eswr_plus_edges_replicate(const AdjacencyMatrix& A, std::uint64_t seed) {
  const auto edges = A.edges();
  detail::require(!edges.empty(), "edge-list bootstrap needs at least one edge");
  const std::size_t n = A.n();
  Rng rng(seed);
  auto sampled = detail::eswr_edges(edges, rng);
  const std::size_t missing = edges.size() - sampled.size();
  const std::size_t pairs = n * (n - 1) / 2;
  if (pairs - sampled.size() < missing)
    throw NumericalError("cannot top up replicate: complement of sampled edges is too small");
  std::unordered_set<std::uint64_t> present;
  for (const auto& e : sampled) present.insert(detail::pair_key(e.u, e.v));
  for (std::size_t added = 0; added < missing;) {
    const auto u = static_cast<NodeIndex>(rng.below(n));
    const auto v = static_cast<NodeIndex>(rng.below(n));
    if (u == v) continue;
    if (!present.insert(detail::pair_key(u, v)).second) continue;
    sampled.push_back({std::min(u, v), std::max(u, v)});
    ++added;
  }
  return AdjacencyMatrix::from_edges(n, sampled);
}

inline BootstrapBatch eswr_bootstrap(const AdjacencyMatrix& A, std::size_t B, std::uint64_t seed,
                                     std::size_t workers = 1) {
  detail::require(A.edge_count() > 0, "edge-list bootstrap needs at least one edge");
  BootstrapBatch batch;
  batch.estimator = BootstrapMethod::Eswr;
  batch.master_seed = seed;
  batch.seeds = detail::replicate_seeds(seed, B);
  batch.replicates.resize(B);
  parallel_for(B, workers, [&](std::size_t b) { batch.replicates[b] = eswr_replicate(A, batch.seeds[b]); });
  return batch;
}

inline BootstrapBatch eswr_plus_edges_bootstrap(const AdjacencyMatrix& A, std::size_t B,
                                                std::uint64_t seed, std::size_t workers = 1) {
  detail::require(A.edge_count() > 0, "edge-list bootstrap needs at least one edge");
  BootstrapBatch batch;
  batch.estimator = BootstrapMethod::EswrPlus;
  batch.master_seed = seed;
  batch.seeds = detail::replicate_seeds(seed, B);
  batch.replicates.resize(B);
  parallel_for(B, workers,
               [&](std::size_t b) { batch.replicates[b] = eswr_plus_edges_replicate(A, batch.seeds[b]); });
  return batch;
}

/// Full description of a bootstrap procedure.
struct BootstrapConfig {
  BootstrapMethod method = BootstrapMethod::AseKnn;
  int k = 5;
  /// Embedding dimension for ASE-kNN and XXT. Unset: elbow selection (ASE-kNN only).
  std::optional<int> d;
  /// Required for ExternalKnn.
  std::shared_ptr<const Embedding> external_embedding;
  EmbedOptions embed;
  KnnOptions knn;
};

/// Estimator state for one observed graph, from which any number of replicates can be
/// drawn. `truth` is needed only by TrueResample.
class Resampler {
 public:
  Resampler(const AdjacencyMatrix& observed, const BootstrapConfig& config,
            const ProbabilityMatrix* truth = nullptr)
      : observed_(observed), method_(config.method) {
    switch (config.method) {
      case BootstrapMethod::AseKnn:
        phat_ = knn_phat(observed, ase_knn_embedding(observed, config.d, config.embed), config.k, config.knn);
        break;
      case BootstrapMethod::ExternalKnn:
        detail::require(config.external_embedding != nullptr,
                        "external-knn bootstrap needs an embedding");
        phat_ = knn_phat(observed, *config.external_embedding, config.k, config.knn);
        break;
      case BootstrapMethod::Xxt:
        detail::require(config.d.has_value(), "xxt bootstrap needs an explicit d");
        phat_ = xxt_phat(observed, *config.d, config.embed);
        break;
      case BootstrapMethod::TrueResample:
        detail::require(truth != nullptr, "true-resample needs the generating probability matrix");
        detail::require(truth->n() == observed.n(), "probability matrix size mismatch");
        phat_ = *truth;
        break;
      case BootstrapMethod::Eswr:
      case BootstrapMethod::EswrPlus:
        detail::require(observed.edge_count() > 0, "edge-list bootstrap needs at least one edge");
        break;
      case BootstrapMethod::Identity:
        break;
    }
  }

  AdjacencyMatrix draw(std::uint64_t seed) const {
    switch (method_) {
      case BootstrapMethod::Eswr: return eswr_replicate(observed_, seed);
      case BootstrapMethod::EswrPlus: return eswr_plus_edges_replicate(observed_, seed);
      case BootstrapMethod::Identity: return observed_;
      default: return sample_birg(*phat_, seed);
    }
  }

  BootstrapBatch batch(std::size_t B, std::uint64_t seed, std::size_t workers = 1) const {
    BootstrapBatch out;
    out.estimator = method_;
    out.phat = phat_;
    out.master_seed = seed;
    out.seeds = detail::replicate_seeds(seed, B);
    out.replicates.resize(B);
    parallel_for(B, workers, [&](std::size_t b) { out.replicates[b] = draw(out.seeds[b]); });
    return out;
  }

  const std::optional<ProbabilityMatrix>& phat() const { return phat_; }

 private:
  AdjacencyMatrix observed_;
  BootstrapMethod method_;
  std::optional<ProbabilityMatrix> phat_;
};

// --- export -----------------------------------------------------------------------

/// Dense CSV, one row per node, no header.
inline void write_phat_csv(std::ostream& out, const ProbabilityMatrix& P) {
  out << std::setprecision(17);
  const auto& V = P.values();
  for (Eigen::Index i = 0; i < V.rows(); ++i) {
    for (Eigen::Index j = 0; j < V.cols(); ++j) out << (j ? "," : "") << V(i, j);
    out << '\n';
  }
}

/// Matrix Market `real symmetric` coordinate file of the nonzero lower triangle.
inline void write_phat_matrix_market(std::ostream& out, const ProbabilityMatrix& P) {
  const auto& V = P.values();
  std::size_t nnz = 0;
  for (Eigen::Index j = 0; j < V.cols(); ++j)
    for (Eigen::Index i = j; i < V.rows(); ++i) nnz += V(i, j) != 0.0;
  out << "%%MatrixMarket matrix coordinate real symmetric\n";
  out << V.rows() << ' ' << V.cols() << ' ' << nnz << '\n' << std::setprecision(17);
  for (Eigen::Index j = 0; j < V.cols(); ++j)
    for (Eigen::Index i = j; i < V.rows(); ++i)
      if (V(i, j) != 0.0) out << (i + 1) << ' ' << (j + 1) << ' ' << V(i, j) << '\n';
}

/// Writes `replicate_<b>.tsv` edge lists and a `manifest.json` into `dir`.
inline void write_batch(const std::filesystem::path& dir, const BootstrapBatch& batch,
                        std::optional<int> k = std::nullopt, std::optional<int> d = std::nullopt) {
  std::filesystem::create_directories(dir);
  for (std::size_t b = 0; b < batch.replicates.size(); ++b)
    io::write_atomic(dir / ("replicate_" + std::to_string(b) + ".tsv"),
                     [&](std::ostream& out) { io::write_edge_list(out, batch.replicates[b]); });
  nlohmann::json manifest;
  manifest["estimator_tag"] = to_string(batch.estimator);
  manifest["master_seed"] = batch.master_seed;
  manifest["seeds"] = batch.seeds;
  manifest["B"] = batch.replicates.size();
  manifest["k"] = k ? nlohmann::json(*k) : nlohmann::json(nullptr);
  manifest["d"] = d ? nlohmann::json(*d) : nlohmann::json(nullptr);
  io::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace netboot
