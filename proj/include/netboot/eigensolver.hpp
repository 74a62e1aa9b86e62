#pragma once

// Partial symmetric eigensolvers: a dense exact path and a restarted Lanczos iteration
// with full reorthogonalization for operators given as matrix-vector products.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "netboot/error.hpp"
#include "netboot/random.hpp"

namespace netboot::linalg {

enum class Selection { LargestMagnitude, LargestAlgebraic };
enum class Backend { Auto, Dense, Iterative };

struct EigenOptions {
  Backend backend = Backend::Auto;
  /// Auto uses the dense solver for n at or below this size.
  std::size_t dense_threshold = 512;
  double tolerance = 1e-10;
  int max_iterations = 1000;
};

struct EigenResult {
  Eigen::VectorXd values;   ///< in selection order
  Eigen::MatrixXd vectors;  ///< orthonormal columns, sign-fixed
  Backend backend = Backend::Dense;
  int iterations = 0;       ///< restart cycles (iterative backend)
  double max_residual = 0;  ///< max ||A v - lambda v|| over returned pairs
  bool boundary_tie = false;
};

/// Indices of `values` in selection order. Magnitude ties prefer the positive value,
/// then the lower index.
inline std::vector<Eigen::Index> selection_order(const Eigen::VectorXd& values, Selection sel) {
  std::vector<Eigen::Index> order(values.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (sel == Selection::LargestMagnitude) {
      const double ma = std::abs(values(a)), mb = std::abs(values(b));
      if (ma != mb) return ma > mb;
    }
    return values(a) > values(b);
  });
  return order;
}

/// Orients each column so its largest-magnitude entry is positive. Entries within a
/// relative 1e-8 of the maximum count as tied and the lowest index wins.
inline void fix_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    const double top = vectors.col(c).cwiseAbs().maxCoeff();
    if (top == 0.0) continue;
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
      if (std::abs(vectors(r, c)) >= top * (1.0 - 1e-8)) {
        if (vectors(r, c) < 0.0) vectors.col(c) *= -1.0;
        break;
      }
    }
  }
}

namespace detail {

inline bool tie_at_boundary(const Eigen::VectorXd& all, const std::vector<Eigen::Index>& order,
                            int count, Selection sel) {
  if (count <= 0 || static_cast<std::size_t>(count) >= order.size()) return false;
  auto key = [&](Eigen::Index i) {
    return sel == Selection::LargestMagnitude ? std::abs(all(i)) : all(i);
  };
  const double a = key(order[count - 1]), b = key(order[count]);
  const double scale = std::max(1.0, all.cwiseAbs().maxCoeff());
  return std::abs(a - b) <= 1e-12 * scale;
}

}  // namespace detail

/// Exact eigenpairs of a dense symmetric matrix, `count` of them in selection order.
inline EigenResult dense_eigs(const Eigen::MatrixXd& symmetric, int count, Selection sel) {
  const auto n = symmetric.rows();
  netboot::detail::require(symmetric.cols() == n, "eigensolver needs a square matrix");
  netboot::detail::require(count >= 1 && count <= n, "requested eigenpair count out of range");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetric);
  if (solver.info() != Eigen::Success) throw NumericalError("dense symmetric eigensolver failed");
  const auto order = selection_order(solver.eigenvalues(), sel);
  EigenResult out;
  out.values.resize(count);
  out.vectors.resize(n, count);
  for (int k = 0; k < count; ++k) {
    out.values(k) = solver.eigenvalues()(order[k]);
    out.vectors.col(k) = solver.eigenvectors().col(order[k]);
  }
  out.boundary_tie = detail::tie_at_boundary(solver.eigenvalues(), order, count, sel);
  fix_signs(out.vectors);
  out.backend = Backend::Dense;
  out.max_residual = (symmetric * out.vectors - out.vectors * out.values.asDiagonal())
                         .colwise()
                         .norm()
                         .maxCoeff();
  return out;
}

/// Restarted Lanczos for a symmetric operator `apply(const Eigen::VectorXd&) -> VectorXd`.
/// The projected matrix is formed explicitly against the full basis, and each restart
/// keeps the leading Ritz vectors plus the current residual direction. The start vector is
/// fixed, so the output does not depend on any caller seed.
template <class Apply>
EigenResult lanczos_eigs(std::size_t n, Apply&& apply, int count, Selection sel,
                         const EigenOptions& options = {}) {
  netboot::detail::require(count >= 1 && static_cast<std::size_t>(count) <= n,
                           "requested eigenpair count out of range");
  const auto N = static_cast<Eigen::Index>(n);
  const Eigen::Index m_max = std::min<Eigen::Index>(N, std::max<Eigen::Index>(2 * count + 20, 40));

  Eigen::MatrixXd V(N, m_max);
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m_max, m_max);
  Rng rng(0x6c616e637a6f73ULL);

  auto random_orthogonal = [&](Eigen::Index filled) -> Eigen::VectorXd {
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::VectorXd v(N);
      for (Eigen::Index i = 0; i < N; ++i) v(i) = rng.uniform() - 0.5;
      for (int pass = 0; pass < 2; ++pass)
        if (filled > 0) v -= V.leftCols(filled) * (V.leftCols(filled).transpose() * v);
      const double norm = v.norm();
      if (norm > 1e-8) return v / norm;
    }
    throw NumericalError("Lanczos could not extend the Krylov basis");
  };

  V.col(0) = random_orthogonal(0);
  Eigen::Index kept = 0;  // leading columns that are Ritz vectors from the last restart
  Eigen::VectorXd residual = Eigen::VectorXd::Zero(N);
  double beta = 0.0;

  for (int cycle = 0;; ++cycle) {
    Eigen::Index m = kept;
    for (Eigen::Index j = kept; j < m_max; ++j) {
      Eigen::VectorXd w = apply(Eigen::VectorXd(V.col(j)));
      const auto basis = V.leftCols(j + 1);
      Eigen::VectorXd h = basis.transpose() * w;
      w -= basis * h;
      const Eigen::VectorXd h2 = basis.transpose() * w;
      w -= basis * h2;
      h += h2;
      T.block(0, j, j + 1, 1) = h;
      T.block(j, 0, 1, j + 1) = h.transpose();
      m = j + 1;
      beta = w.norm();
      const double scale = std::max(1.0, T.topLeftCorner(m, m).cwiseAbs().maxCoeff());
      if (beta <= 1e-13 * scale) {
        beta = 0.0;
        residual.setZero();
        if (m == N) break;
        if (j + 1 < m_max) V.col(j + 1) = random_orthogonal(j + 1);
      } else {
        residual = w / beta;
        if (j + 1 < m_max) V.col(j + 1) = residual;
      }
    }

    Eigen::MatrixXd Tm = T.topLeftCorner(m, m);
    Tm = 0.5 * (Tm + Tm.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(Tm);
    if (small.info() != Eigen::Success) throw NumericalError("Lanczos projected eigenproblem failed");
    const Eigen::VectorXd& theta = small.eigenvalues();
    const Eigen::MatrixXd& S = small.eigenvectors();
    const auto order = selection_order(theta, sel);

    const double scale = std::max(theta.cwiseAbs().maxCoeff(), 1e-300);
    double worst = 0.0;
    for (int k = 0; k < count; ++k) worst = std::max(worst, beta * std::abs(S(m - 1, order[k])));
    const bool converged = worst <= options.tolerance * scale || m == N;

    if (converged) {
      EigenResult out;
      out.values.resize(count);
      Eigen::MatrixXd select(m, count);
      for (int k = 0; k < count; ++k) {
        out.values(k) = theta(order[k]);
        select.col(k) = S.col(order[k]);
      }
      out.vectors = V.leftCols(m) * select;
      fix_signs(out.vectors);
      out.backend = Backend::Iterative;
      out.iterations = cycle;
      out.boundary_tie = detail::tie_at_boundary(theta, order, count, sel);
      double max_res = 0.0;
      for (int k = 0; k < count; ++k) {
        const Eigen::VectorXd v = out.vectors.col(k);
        max_res = std::max(max_res, (apply(v) - out.values(k) * v).norm());
      }
      out.max_residual = max_res;
      return out;
    }
    if (cycle + 1 >= options.max_iterations)
      throw NumericalError("Lanczos did not converge after " + std::to_string(cycle + 1) +
                           " restarts (n=" + std::to_string(n) + ", requested " +
                           std::to_string(count) + ", worst residual " + std::to_string(worst) +
                           ", tolerance " + std::to_string(options.tolerance * scale) + ")");

    const Eigen::Index keep = std::min<Eigen::Index>(m - 1, count + (m - count) / 2);
    Eigen::MatrixXd select(m, keep);
    for (Eigen::Index k = 0; k < keep; ++k) select.col(k) = S.col(order[k]);
    const Eigen::MatrixXd ritz = V.leftCols(m) * select;
    V.leftCols(keep) = ritz;
    T.setZero();
    for (Eigen::Index k = 0; k < keep; ++k) T(k, k) = theta(order[k]);
    if (beta == 0.0) {
      V.col(keep) = random_orthogonal(keep);
    } else {
      // Re-orthogonalize the residual against the rotated basis to absorb drift.
      Eigen::VectorXd r = residual;
      for (int pass = 0; pass < 2; ++pass) r -= V.leftCols(keep) * (V.leftCols(keep).transpose() * r);
      V.col(keep) = r / r.norm();
    }
    kept = keep;
  }
}

}  // namespace netboot::linalg
