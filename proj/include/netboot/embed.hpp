#pragma once

// Spectral embeddings of one or several networks on a shared node set.

#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "netboot/diagnostics.hpp"
#include "netboot/eigensolver.hpp"
#include "netboot/error.hpp"
#include "netboot/graph.hpp"

namespace netboot {

enum class EmbeddingMethod { Ase, Uase, DilatedAse, External };
enum class Scaling { SqrtSigma, FullSigma };

inline const char* to_string(EmbeddingMethod m) {
  switch (m) {
    case EmbeddingMethod::Ase: return "ase";
    case EmbeddingMethod::Uase: return "uase";
    case EmbeddingMethod::DilatedAse: return "dilated-ase";
    case EmbeddingMethod::External: return "external";
  }
  return "?";
}

inline const char* to_string(Scaling s) { return s == Scaling::SqrtSigma ? "sqrt-sigma" : "full-sigma"; }

/// Node positions. Multi-network embeddings stack the per-network blocks row-wise and
/// record the block boundaries in `block_offsets` (M + 1 entries).
struct Embedding {
  Eigen::MatrixXd positions;
  EmbeddingMethod method = EmbeddingMethod::External;
  Scaling scaling = Scaling::SqrtSigma;
  std::vector<std::size_t> block_offsets;

  Eigen::Index rows() const { return positions.rows(); }
  int dimension() const { return static_cast<int>(positions.cols()); }
  std::size_t block_count() const { return block_offsets.empty() ? 1 : block_offsets.size() - 1; }
  std::size_t block_size() const { return static_cast<std::size_t>(rows()) / block_count(); }

  auto block(std::size_t m) const {
    const auto begin = block_offsets.empty() ? 0 : static_cast<Eigen::Index>(block_offsets[m]);
    return positions.middleRows(begin, static_cast<Eigen::Index>(block_size()));
  }

  void validate() const {
    detail::require(positions.cols() >= 1, "embedding dimension must be at least 1");
    detail::require(positions.allFinite(), "embedding has non-finite entries");
    if (!block_offsets.empty()) {
      const std::size_t M = block_offsets.size() - 1;
      detail::require(M >= 1 && static_cast<std::size_t>(rows()) % M == 0,
                      "embedding rows must split evenly into blocks");
      const std::size_t size = static_cast<std::size_t>(rows()) / M;
      for (std::size_t m = 0; m <= M; ++m)
        detail::require(block_offsets[m] == m * size, "block offsets must partition rows evenly");
    }
  }

  /// Splits an evenly blocked matrix into `blocks` row groups.
  static std::vector<std::size_t> even_offsets(std::size_t rows, std::size_t blocks) {
    std::vector<std::size_t> offsets(blocks + 1);
    for (std::size_t m = 0; m <= blocks; ++m) offsets[m] = m * (rows / blocks);
    return offsets;
  }
};

/// Leading eigen- or singular values, nonincreasing in magnitude.
struct SpectrumInfo {
  std::vector<double> values;
  int d_selected = 0;
};

struct EmbeddingResult {
  Embedding embedding;
  SpectrumInfo spectrum;
};

struct EmbedOptions {
  linalg::EigenOptions eigen;
};

namespace detail {

inline bool use_dense(std::size_t n, const linalg::EigenOptions& o) {
  if (o.backend == linalg::Backend::Dense) return true;
  if (o.backend == linalg::Backend::Iterative) return false;
  return n <= o.dense_threshold;
}

inline linalg::EigenResult adjacency_eigs(const AdjacencyMatrix& A, int count,
                                          linalg::Selection sel, const EmbedOptions& options) {
  require(A.n() >= 1, "cannot embed an empty node set");
  require(count >= 1 && static_cast<std::size_t>(count) <= A.n(),
          "embedding dimension must satisfy 1 <= d <= n");
  linalg::EigenResult r =
      use_dense(A.n(), options.eigen)
          ? linalg::dense_eigs(A.dense(), count, sel)
          : linalg::lanczos_eigs(
                A.n(), [&](const Eigen::VectorXd& x) { return A.multiply(x); }, count, sel,
                options.eigen);
  if (r.boundary_tie)
    warn("eigenvalue magnitude tie at the truncation boundary d=" + std::to_string(count) +
         "; keeping the lower-index eigenvector");
  return r;
}

inline SpectrumInfo spectrum_of(const Eigen::VectorXd& values, int d) {
  return {std::vector<double>(values.data(), values.data() + values.size()), d};
}

inline void require_common_n(const std::vector<AdjacencyMatrix>& networks) {
  require(!networks.empty(), "need at least one network");
  for (const auto& A : networks)
    require(A.n() == networks.front().n(), "all networks must share the same node count");
}

/// Gram matrix of the unfolding, sum_m A_m A_m^T, accumulated over common neighbours.
inline Eigen::MatrixXd unfolding_gram(const std::vector<AdjacencyMatrix>& networks) {
  const std::size_t n = networks.front().n();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  for (const auto& A : networks)
    for (std::size_t k = 0; k < n; ++k) {
      const auto nb = A.neighbors(k);
      for (NodeIndex i : nb)
        for (NodeIndex j : nb) G(i, j) += 1.0;
    }
  return G;
}

}  // namespace detail

/// Adjacency spectral embedding: U |Lambda|^{1/2} over the d largest-magnitude eigenpairs.
inline EmbeddingResult ase(const AdjacencyMatrix& A, int d, const EmbedOptions& options = {}) {
  const auto r = detail::adjacency_eigs(A, d, linalg::Selection::LargestMagnitude, options);
  Embedding e;
  e.positions = r.vectors * r.values.cwiseAbs().cwiseSqrt().asDiagonal();
  e.method = EmbeddingMethod::Ase;
  e.scaling = Scaling::SqrtSigma;
  return {std::move(e), detail::spectrum_of(r.values, d)};
}

/// ASE variant with full eigenvalue weighting, U |Lambda|. Neighbourhoods computed in it
/// depend less on over-estimating d because trailing dimensions are down-weighted.
inline EmbeddingResult ase_alternative_scaling(const AdjacencyMatrix& A, int d,
                                               const EmbedOptions& options = {}) {
  const auto r = detail::adjacency_eigs(A, d, linalg::Selection::LargestMagnitude, options);
  Embedding e;
  e.positions = r.vectors * r.values.cwiseAbs().asDiagonal();
  e.method = EmbeddingMethod::Ase;
  e.scaling = Scaling::FullSigma;
  return {std::move(e), detail::spectrum_of(r.values, d)};
}

/// The `count` largest-magnitude adjacency eigenvalues (for scree/elbow analysis).
inline SpectrumInfo adjacency_spectrum(const AdjacencyMatrix& A, int count,
                                       const EmbedOptions& options = {}) {
  const auto r = detail::adjacency_eigs(A, count, linalg::Selection::LargestMagnitude, options);
  return detail::spectrum_of(r.values, 0);
}

/// Unfolded adjacency spectral embedding of networks sharing a node set. Computes the
/// rank-d SVD of the n x Mn column concatenation through its n x n Gram matrix and
/// returns V Sigma^{1/2} = (A_m U Sigma^{-1/2})_m, one block of n rows per network.
/// Each column is oriented so its largest-magnitude entry is positive.
inline EmbeddingResult uase(const std::vector<AdjacencyMatrix>& networks, int d,
                            const EmbedOptions& options = {}) {
  detail::require_common_n(networks);
  const std::size_t n = networks.front().n();
  const std::size_t M = networks.size();
  detail::require(d >= 1 && static_cast<std::size_t>(d) <= n,
                  "embedding dimension must satisfy 1 <= d <= n");

  linalg::EigenResult r;
  if (detail::use_dense(n, options.eigen)) {
    r = linalg::dense_eigs(detail::unfolding_gram(networks), d, linalg::Selection::LargestAlgebraic);
  } else {
    auto apply = [&](const Eigen::VectorXd& x) {
      Eigen::VectorXd y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
      for (const auto& A : networks) y += A.multiply(A.multiply(x));
      return y;
    };
    r = linalg::lanczos_eigs(n, apply, d, linalg::Selection::LargestAlgebraic, options.eigen);
  }
  if (r.boundary_tie)
    warn("singular value tie at the truncation boundary d=" + std::to_string(d) +
         "; keeping the lower-index singular vector");

  const Eigen::VectorXd sigma = r.values.cwiseMax(0.0).cwiseSqrt();
  const double floor = std::max(1.0, sigma.size() ? sigma(0) : 0.0) * 1e-12;
  Eigen::VectorXd inv_sqrt(d);
  for (int k = 0; k < d; ++k) inv_sqrt(k) = sigma(k) > floor ? 1.0 / std::sqrt(sigma(k)) : 0.0;

  Embedding e;
  e.positions.resize(static_cast<Eigen::Index>(M * n), d);
  const Eigen::MatrixXd scaled_u = r.vectors * inv_sqrt.asDiagonal();
  for (std::size_t m = 0; m < M; ++m)
    e.positions.middleRows(static_cast<Eigen::Index>(m * n), static_cast<Eigen::Index>(n)) =
        networks[m].multiply(scaled_u);
  linalg::fix_signs(e.positions);
  e.method = EmbeddingMethod::Uase;
  e.scaling = Scaling::SqrtSigma;
  e.block_offsets = Embedding::even_offsets(M * n, M);
  return {std::move(e), detail::spectrum_of(sigma, d)};
}

/// Symmetric dilation [0 U; U^T 0] of the unfolding U = (A_1, ..., A_M), as a graph on
/// n(M+1) nodes: anchor nodes 0..n-1 followed by one copy of the node set per network.
inline AdjacencyMatrix dilation(const std::vector<AdjacencyMatrix>& networks) {
  detail::require_common_n(networks);
  const std::size_t n = networks.front().n();
  std::vector<Edge> edges;
  for (std::size_t m = 0; m < networks.size(); ++m)
    for (const auto& e : networks[m].edges()) {
      const auto offset = static_cast<NodeIndex>((m + 1) * n);
      edges.push_back({e.u, static_cast<NodeIndex>(offset + e.v)});
      edges.push_back({e.v, static_cast<NodeIndex>(offset + e.u)});
    }
  return AdjacencyMatrix::from_edges(n * (networks.size() + 1), edges);
}

/// Single-network embedder used on a dilation: graph and dimension to an n x d matrix.
using SingleNetworkEmbedder = std::function<Eigen::MatrixXd(const AdjacencyMatrix&, int)>;

/// ASE for dilations. A dilation's spectrum is symmetric (+sigma, -sigma), so the d
/// largest algebraic eigenvalues are taken; this keeps one eigenvector per singular pair.
inline Eigen::MatrixXd dilation_ase(const AdjacencyMatrix& D, int d, const EmbedOptions& options = {}) {
  const auto r = detail::adjacency_eigs(D, d, linalg::Selection::LargestAlgebraic, options);
  return r.vectors * r.values.cwiseAbs().cwiseSqrt().asDiagonal();
}

/// Embeds the dilation with `embedder` and returns the multi-network block (the rows after
/// the first n anchor rows). With the default ASE embedder the result equals UASE up to an
/// orthogonal transform and a factor 1/sqrt(2).
inline Embedding dilated_unfolded_embed(const std::vector<AdjacencyMatrix>& networks, int d,
                                        SingleNetworkEmbedder embedder = {}) {
  detail::require_common_n(networks);
  const std::size_t n = networks.front().n();
  const std::size_t M = networks.size();
  detail::require(d >= 1 && static_cast<std::size_t>(d) <= n,
                  "embedding dimension must satisfy 1 <= d <= n");
  if (!embedder) embedder = [](const AdjacencyMatrix& D, int dim) { return dilation_ase(D, dim); };
  const Eigen::MatrixXd all = embedder(dilation(networks), d);
  detail::require(all.rows() == static_cast<Eigen::Index>(n * (M + 1)) && all.cols() == d,
                  "embedder returned a matrix of the wrong shape");
  Embedding e;
  e.positions = all.bottomRows(static_cast<Eigen::Index>(M * n));
  e.method = EmbeddingMethod::DilatedAse;
  e.scaling = Scaling::SqrtSigma;
  e.block_offsets = Embedding::even_offsets(M * n, M);
  e.validate();
  return e;
}

/// Profile-likelihood elbow of a scree sequence. Magnitudes are sorted in decreasing
/// order and split into a leading group of q values and the rest, both Gaussian with a
/// common variance; the returned q maximizes the profile likelihood over 1 <= q < p.
/// That maximizer is the split with the smallest pooled within-group sum of squares.
/// Ties go to the smaller q, so a constant spectrum yields 1.
inline int select_dimension_elbow(const SpectrumInfo& spectrum) {
  detail::require(spectrum.values.size() >= 3, "elbow selection needs at least 3 values");
  std::vector<double> x;
  for (double v : spectrum.values) x.push_back(std::abs(v));
  std::sort(x.begin(), x.end(), std::greater<>());
  const std::size_t p = x.size();
  auto ss = [&](std::size_t begin, std::size_t end) {
    double mean = 0.0;
    for (std::size_t i = begin; i < end; ++i) mean += x[i];
    mean /= static_cast<double>(end - begin);
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += (x[i] - mean) * (x[i] - mean);
    return s;
  };
  int best = 1;
  double best_ss = std::numeric_limits<double>::infinity();
  const double scale = x.front() * x.front() * static_cast<double>(p);
  for (std::size_t q = 1; q < p; ++q) {
    const double s = ss(0, q) + ss(q, p);
    if (s < best_ss - 1e-14 * scale) {
      best_ss = s;
      best = static_cast<int>(q);
    }
  }
  return best;
}

// --- CSV / JSON interchange -------------------------------------------------------

/// One row per node: an optional leading `label` column, then d numeric columns.
inline void write_embedding_csv(std::ostream& out, const Embedding& e,
                                const std::vector<std::string>* labels = nullptr) {
  if (labels) detail::require(labels->size() == static_cast<std::size_t>(e.rows()),
                              "label count must match embedding rows");
  if (labels) out << "label,";
  for (int c = 0; c < e.dimension(); ++c) out << (c ? "," : "") << "dim" << (c + 1);
  out << '\n';
  std::ostringstream cell;
  cell << std::setprecision(17);
  for (Eigen::Index r = 0; r < e.rows(); ++r) {
    if (labels) out << (*labels)[r] << ',';
    for (int c = 0; c < e.dimension(); ++c) {
      cell.str("");
      cell << e.positions(r, c);
      out << (c ? "," : "") << cell.str();
    }
    out << '\n';
  }
}

/// Reads an n x d numeric CSV. A first row containing any non-numeric cell is a header;
/// a header whose first cell is `label` marks a leading label column, which is skipped.
inline Embedding read_embedding_csv(std::istream& in, std::size_t expected_n,
                                    const std::string& source = "<embedding csv>") {
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream s(line);
    while (std::getline(s, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
      cells.push_back(cell);
    }
    return cells;
  };
  auto number = [](const std::string& s, double& v) {
    if (s.empty()) return false;
    char* end = nullptr;
    v = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
  };

  std::vector<std::vector<double>> rows;
  bool first = true, skip_label = false;
  std::size_t line_no = 0, width = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split(line);
    if (first) {
      first = false;
      double v;
      bool header = false;
      for (const auto& c : cells) header = header || !number(c, v);
      if (header) {
        skip_label = !cells.empty() && cells.front() == "label";
        continue;
      }
    }
    if (skip_label) cells.erase(cells.begin());
    std::vector<double> row;
    for (const auto& c : cells) {
      double v;
      if (!number(c, v))
        throw InvalidArgument(source + ":" + std::to_string(line_no) + ": non-numeric cell '" + c + "'");
      row.push_back(v);
    }
    if (rows.empty()) width = row.size();
    if (row.size() != width || width == 0)
      throw InvalidArgument(source + ":" + std::to_string(line_no) + ": inconsistent column count");
    rows.push_back(std::move(row));
  }
  if (rows.size() != expected_n)
    throw InvalidArgument(source + ": expected " + std::to_string(expected_n) + " rows, found " +
                          std::to_string(rows.size()));
  Embedding e;
  e.positions.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < width; ++c) e.positions(r, c) = rows[r][c];
  e.method = EmbeddingMethod::External;
  e.validate();
  return e;
}

inline Embedding load_external_embedding(const std::string& path, std::size_t expected_n) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  return read_embedding_csv(in, expected_n, path);
}

inline nlohmann::json to_json(const SpectrumInfo& s) {
  return {{"values", s.values}, {"d_selected", s.d_selected}};
}

}  // namespace netboot
