#pragma once

// Exact Euclidean k-nearest-neighbour search. Candidates are ordered by
// (squared distance, index), so ties at the k-th distance go to the lower index.

#include <algorithm>
#include <cstddef>
#include <memory>
#include <numeric>
#include <queue>
#include <vector>

#include <Eigen/Dense>

#include "netboot/error.hpp"
#include "netboot/graph.hpp"

namespace netboot {

enum class KnnSearch { Auto, BruteForce, KdTree };

struct KnnOptions {
  KnnSearch search = KnnSearch::Auto;
  /// Auto switches to the kd-tree above this many points.
  std::size_t tree_threshold = 4096;
};

namespace detail {

struct Candidate {
  double dist2;
  NodeIndex index;
  bool operator<(const Candidate& o) const {
    return dist2 < o.dist2 || (dist2 == o.dist2 && index < o.index);
  }
};

inline double squared_distance(const Eigen::MatrixXd& X, Eigen::Index a, Eigen::Index b) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    const double t = X(a, c) - X(b, c);
    s += t * t;
  }
  return s;
}

class KdTree {
 public:
  explicit KdTree(const Eigen::MatrixXd& points) : X_(points), order_(points.rows()) {
    std::iota(order_.begin(), order_.end(), NodeIndex{0});
    nodes_.reserve(2 * order_.size() / kLeaf + 2);
    root_ = build(0, order_.size(), 0);
  }

  /// The `count` nearest points to row `query`, excluding the query itself, sorted.
  std::vector<Candidate> nearest(Eigen::Index query, std::size_t count) const {
    std::priority_queue<Candidate> heap;  // max-heap: worst candidate on top
    search(root_, query, count, heap);
    std::vector<Candidate> out;
    out.reserve(heap.size());
    while (!heap.empty()) {
      out.push_back(heap.top());
      heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  static constexpr std::size_t kLeaf = 16;

  struct Node {
    std::size_t begin, end;
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    int left = -1, right = -1;
  };

  int build(std::size_t begin, std::size_t end, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({begin, end});
    if (end - begin <= kLeaf) return id;
    // Split on the widest coordinate at the median.
    int axis = 0;
    double widest = -1.0;
    for (Eigen::Index c = 0; c < X_.cols(); ++c) {
      double lo = X_(order_[begin], c), hi = lo;
      for (std::size_t i = begin; i < end; ++i) {
        lo = std::min(lo, X_(order_[i], c));
        hi = std::max(hi, X_(order_[i], c));
      }
      if (hi - lo > widest) {
        widest = hi - lo;
        axis = static_cast<int>(c);
      }
    }
    if (widest <= 0.0) return id;
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](NodeIndex a, NodeIndex b) { return X_(a, axis) < X_(b, axis); });
    const double split = X_(order_[mid], axis);
    const int left = build(begin, mid, depth + 1);
    const int right = build(mid, end, depth + 1);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void search(int id, Eigen::Index query, std::size_t count,
              std::priority_queue<Candidate>& heap) const {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const NodeIndex j = order_[i];
        if (j == query) continue;
        const Candidate c{squared_distance(X_, query, j), j};
        if (heap.size() < count) {
          heap.push(c);
        } else if (c < heap.top()) {
          heap.pop();
          heap.push(c);
        }
      }
      return;
    }
    const double delta = X_(query, node.axis) - node.split;
    const int near = delta < 0.0 ? node.left : node.right;
    const int far = delta < 0.0 ? node.right : node.left;
    search(near, query, count, heap);
    // Equal distance still has to be explored: a lower index may win the tie.
    if (heap.size() < count || delta * delta <= heap.top().dist2) search(far, query, count, heap);
  }

  const Eigen::MatrixXd& X_;
  std::vector<NodeIndex> order_;
  std::vector<Node> nodes_;
  int root_ = 0;
};

}  // namespace detail

/// Neighbourhoods of size k for every row of `points`. Row i of the result is node i
/// itself followed by its k - 1 nearest other nodes in (distance, index) order.
inline std::vector<std::vector<NodeIndex>> nearest_neighbours(const Eigen::MatrixXd& points, int k,
                                                              const KnnOptions& options = {}) {
  const auto n = static_cast<std::size_t>(points.rows());
  detail::require(k >= 1 && static_cast<std::size_t>(k) <= n, "k must satisfy 1 <= k <= n");
  const std::size_t others = static_cast<std::size_t>(k) - 1;
  const bool tree = options.search == KnnSearch::KdTree ||
                    (options.search == KnnSearch::Auto && n > options.tree_threshold);

  std::vector<std::vector<NodeIndex>> out(n);
  if (tree) {
    const detail::KdTree index(points);
    for (std::size_t i = 0; i < n; ++i) {
      out[i].reserve(k);
      out[i].push_back(static_cast<NodeIndex>(i));
      for (const auto& c : index.nearest(static_cast<Eigen::Index>(i), others)) out[i].push_back(c.index);
    }
    return out;
  }
  std::vector<detail::Candidate> cand;
  cand.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i)
        cand.push_back({detail::squared_distance(points, static_cast<Eigen::Index>(i),
                                                 static_cast<Eigen::Index>(j)),
                        static_cast<NodeIndex>(j)});
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(others), cand.end());
    out[i].reserve(k);
    out[i].push_back(static_cast<NodeIndex>(i));
    for (std::size_t t = 0; t < others; ++t) out[i].push_back(cand[t].index);
  }
  return out;
}

}  // namespace netboot
