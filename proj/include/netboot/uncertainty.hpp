#pragma once

// Per-node bootstrap uncertainty in a joint embedding, the mutual-overlap (fuzziness)
// matrix, and the fuzziness score of a 2-D layout.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "netboot/bootstrap.hpp"
#include "netboot/embed.hpp"
#include "netboot/error.hpp"
#include "netboot/graph.hpp"
#include "netboot/parallel.hpp"

namespace netboot {

struct NodeUncertainty {
  Eigen::MatrixXd means;                    ///< n x d
  std::vector<Eigen::MatrixXd> covariances;  ///< n matrices, d x d
  std::size_t B_used = 0;

  std::size_t n() const { return static_cast<std::size_t>(means.rows()); }
  int dimension() const { return static_cast<int>(means.cols()); }
};

/// Mean and covariance of each node over the blocks of a multi-network embedding. With
/// B + 1 blocks the covariance divides by B.
inline NodeUncertainty node_uncertainty(const Embedding& joint) {
  joint.validate();
  const std::size_t blocks = joint.block_count();
  detail::require(blocks >= 2, "node uncertainty needs at least two embedded networks");
  const auto n = static_cast<Eigen::Index>(joint.block_size());
  const int d = joint.dimension();
  NodeUncertainty u;
  u.B_used = blocks - 1;
  u.means = Eigen::MatrixXd::Zero(n, d);
  for (std::size_t m = 0; m < blocks; ++m) u.means += joint.block(m);
  u.means /= static_cast<double>(blocks);
  u.covariances.assign(static_cast<std::size_t>(n), Eigen::MatrixXd::Zero(d, d));
  for (std::size_t m = 0; m < blocks; ++m) {
    const Eigen::MatrixXd centred = joint.block(m) - u.means;
    for (Eigen::Index i = 0; i < n; ++i)
      u.covariances[static_cast<std::size_t>(i)].noalias() += centred.row(i).transpose() * centred.row(i);
  }
  for (auto& c : u.covariances) c /= static_cast<double>(blocks - 1);
  return u;
}

/// Joint UASE of the observed network and its bootstraps, then per-node statistics.
inline std::pair<Embedding, NodeUncertainty> node_uncertainty(const AdjacencyMatrix& observed,
                                                              const BootstrapBatch& batch, int d,
                                                              const EmbedOptions& options = {}) {
  detail::require(!batch.replicates.empty(), "node uncertainty needs at least one bootstrap replicate");
  std::vector<AdjacencyMatrix> networks;
  networks.reserve(batch.replicates.size() + 1);
  networks.push_back(observed);
  for (const auto& r : batch.replicates) {
    detail::require(r.n() == observed.n(), "replicates must share the observed node set");
    networks.push_back(r);
  }
  Embedding joint = uase(networks, d, options).embedding;
  NodeUncertainty u = node_uncertainty(joint);
  return {std::move(joint), std::move(u)};
}

/// Binary, symmetric, reflexive overlap indicator stored densely.
class FuzzinessMatrix {
 public:
  FuzzinessMatrix() = default;
  FuzzinessMatrix(std::size_t n, double sd_threshold)
      : n_(n), sd_threshold_(sd_threshold), entries_(n * n, 0) {
    for (std::size_t i = 0; i < n; ++i) entries_[i * n + i] = 1;
  }

  std::size_t n() const { return n_; }
  double sd_threshold() const { return sd_threshold_; }
  bool operator()(std::size_t i, std::size_t j) const { return entries_[i * n_ + j] != 0; }

  void set(std::size_t i, std::size_t j, bool value) {
    entries_[i * n_ + j] = value;
    entries_[j * n_ + i] = value;
  }

  /// Unordered pairs i < j with F_ij = 1.
  std::vector<std::pair<NodeIndex, NodeIndex>> pairs() const {
    std::vector<std::pair<NodeIndex, NodeIndex>> out;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j)
        if ((*this)(i, j)) out.emplace_back(static_cast<NodeIndex>(i), static_cast<NodeIndex>(j));
    return out;
  }

  friend bool operator==(const FuzzinessMatrix&, const FuzzinessMatrix&) = default;

 private:
  std::size_t n_ = 0;
  double sd_threshold_ = 3.0;
  std::vector<std::uint8_t> entries_;
};

namespace detail {

/// Inverse of a PSD covariance with eigenvalues floored at max(1e-12, 1e-9 trace / d).
inline Eigen::MatrixXd floored_inverse(const Eigen::MatrixXd& cov) {
  const auto d = cov.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (cov + cov.transpose()));
  if (eig.info() != Eigen::Success) throw NumericalError("covariance eigendecomposition failed");
  const double floor = std::max(1e-12, 1e-9 * cov.trace() / static_cast<double>(d));
  const Eigen::VectorXd inv = eig.eigenvalues().cwiseMax(floor).cwiseInverse();
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace detail

/// Mahalanobis distance from node i to the point x under node i's own covariance.
inline double mahalanobis(const NodeUncertainty& u, std::size_t i, const Eigen::VectorXd& x) {
  const Eigen::VectorXd delta = x - u.means.row(static_cast<Eigen::Index>(i)).transpose();
  return std::sqrt(std::max(0.0, delta.dot(detail::floored_inverse(u.covariances[i]) * delta)));
}

/// F_ij = 1 when each of i and j lies within `sd_threshold` Mahalanobis units of the
/// other under that node's covariance.
inline FuzzinessMatrix fuzziness_matrix(const NodeUncertainty& u, double sd_threshold = 3.0,
                                        std::size_t workers = 1) {
  detail::require(sd_threshold >= 0.0 && std::isfinite(sd_threshold), "sd threshold must be nonnegative");
  const std::size_t n = u.n();
  detail::require(u.covariances.size() == n, "covariance count must match the node count");
  std::vector<Eigen::MatrixXd> precision(n);
  parallel_for(n, workers, [&](std::size_t i) { precision[i] = detail::floored_inverse(u.covariances[i]); });

  // within(i, j): j lies inside i's ellipse. Rows are filled independently by index.
  std::vector<std::vector<std::uint8_t>> within(n, std::vector<std::uint8_t>(n, 0));
  const double t2 = sd_threshold * sd_threshold;
  parallel_for(n, workers, [&](std::size_t i) {
    const Eigen::RowVectorXd mi = u.means.row(static_cast<Eigen::Index>(i));
    for (std::size_t j = 0; j < n; ++j) {
      const Eigen::RowVectorXd delta = u.means.row(static_cast<Eigen::Index>(j)) - mi;
      within[i][j] = (delta * precision[i]).dot(delta) <= t2;
    }
  });
  FuzzinessMatrix F(n, sd_threshold);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) F.set(i, j, within[i][j] && within[j][i]);
  return F;
}

// --- layouts ----------------------------------------------------------------------

enum class LayoutSource { TsneInternal, External };

struct Layout2D {
  Eigen::MatrixXd positions;  ///< n x 2, standardized
  LayoutSource source = LayoutSource::External;

  /// Per-coordinate z-scores using the population standard deviation.
  static Layout2D standardize(Eigen::MatrixXd raw, LayoutSource source) {
    detail::require(raw.cols() == 2, "layouts are two-dimensional");
    detail::require(raw.rows() >= 2, "a layout needs at least two nodes");
    detail::require(raw.allFinite(), "layout has non-finite coordinates");
    for (Eigen::Index c = 0; c < 2; ++c) {
      raw.col(c).array() -= raw.col(c).mean();
      const double sd = std::sqrt(raw.col(c).squaredNorm() / static_cast<double>(raw.rows()));
      if (!(sd > 0.0)) throw NumericalError("layout coordinate has zero spread");
      raw.col(c) /= sd;
    }
    return {std::move(raw), source};
  }
};

/// Population variance of layout distances over the pairs i < j with F_ij = 1.
inline double fuzziness_score(const Layout2D& layout, const FuzzinessMatrix& F) {
  detail::require(static_cast<std::size_t>(layout.positions.rows()) == F.n(),
                  "layout rows must match the fuzziness matrix");
  std::vector<double> lengths;
  for (const auto& [i, j] : F.pairs()) lengths.push_back((layout.positions.row(i) - layout.positions.row(j)).norm());
  if (lengths.empty()) throw InvalidArgument("fuzziness score undefined: no overlapping node pairs");
  const double count = static_cast<double>(lengths.size());
  double mean = 0.0;
  for (double l : lengths) mean += l;
  mean /= count;
  double sum2 = 0.0;
  for (double l : lengths) sum2 += (l - mean) * (l - mean);
  return sum2 / count;
}

// --- export -----------------------------------------------------------------------

/// One object per node: {"mean": [d], "cov": [d][d]}.
inline nlohmann::json to_json(const NodeUncertainty& u) {
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t i = 0; i < u.n(); ++i) {
    const auto row = u.means.row(static_cast<Eigen::Index>(i));
    nlohmann::json cov = nlohmann::json::array();
    for (Eigen::Index r = 0; r < u.covariances[i].rows(); ++r) {
      nlohmann::json row_json = nlohmann::json::array();
      for (Eigen::Index k = 0; k < u.covariances[i].cols(); ++k) row_json.push_back(u.covariances[i](r, k));
      cov.push_back(std::move(row_json));
    }
    std::vector<double> mean(static_cast<std::size_t>(row.size()));
    for (Eigen::Index k = 0; k < row.size(); ++k) mean[static_cast<std::size_t>(k)] = row(k);
    nodes.push_back({{"mean", mean}, {"cov", cov}});
  }
  return {{"B_used", u.B_used}, {"d", u.dimension()}, {"nodes", nodes}};
}

/// TSV edge list `i j` of the overlapping pairs.
inline void write_fuzziness_edges(std::ostream& out, const FuzzinessMatrix& F) {
  for (const auto& [i, j] : F.pairs()) out << i << '\t' << j << '\n';
}

inline void write_layout_csv(std::ostream& out, const Layout2D& layout) {
  out << "node,x,y\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < layout.positions.rows(); ++i)
    out << i << ',' << layout.positions(i, 0) << ',' << layout.positions(i, 1) << '\n';
}

/// Reads a `node,x,y` layout (node indices 0..n-1 in any order) and standardizes it.
inline Layout2D read_layout_csv(std::istream& in, std::size_t n, const std::string& source = "<layout csv>") {
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(n), 2);
  std::vector<bool> seen(n, false);
  std::size_t line_no = 0, rows = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("node", 0) == 0) continue;
    std::istringstream cells(line);
    std::string a, b, c;
    std::getline(cells, a, ',');
    std::getline(cells, b, ',');
    std::getline(cells, c, ',');
    std::size_t used = 0;
    long long node = -1;
    double x = 0, y = 0;
    try {
      node = std::stoll(a, &used);
      if (used != a.size()) throw std::invalid_argument(a);
      x = std::stod(b);
      y = std::stod(c);
    } catch (const std::exception&) {
      throw InvalidArgument(source + ":" + std::to_string(line_no) + ": expected node,x,y");
    }
    if (node < 0 || static_cast<std::size_t>(node) >= n || seen[static_cast<std::size_t>(node)])
      throw InvalidArgument(source + ":" + std::to_string(line_no) + ": bad or repeated node index");
    seen[static_cast<std::size_t>(node)] = true;
    raw(node, 0) = x;
    raw(node, 1) = y;
    ++rows;
  }
  if (rows != n)
    throw InvalidArgument(source + ": expected " + std::to_string(n) + " layout rows, found " + std::to_string(rows));
  return Layout2D::standardize(std::move(raw), LayoutSource::External);
}

}  // namespace netboot
