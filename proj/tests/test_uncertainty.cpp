#include <gtest/gtest.h>

#include <sstream>

#include "netboot/bootstrap.hpp"
#include "netboot/uncertainty.hpp"
#include "oracles.hpp"

using namespace netboot;

namespace {

Embedding stack(const std::vector<Eigen::MatrixXd>& blocks) {
  const auto n = blocks.front().rows();
  Embedding e;
  e.positions.resize(n * static_cast<Eigen::Index>(blocks.size()), blocks.front().cols());
  for (std::size_t m = 0; m < blocks.size(); ++m) e.positions.middleRows(static_cast<Eigen::Index>(m) * n, n) = blocks[m];
  e.block_offsets = Embedding::even_offsets(static_cast<std::size_t>(e.rows()), blocks.size());
  return e;
}

NodeUncertainty two_nodes(const Eigen::Vector2d& m0, const Eigen::Matrix2d& c0, const Eigen::Vector2d& m1,
                          const Eigen::Matrix2d& c1) {
  NodeUncertainty u;
  u.means.resize(2, 2);
  u.means.row(0) = m0.transpose();
  u.means.row(1) = m1.transpose();
  u.covariances = {c0, c1};
  return u;
}

}  // namespace

TEST(Covariance, TwoValuesOneDimension) {
  Eigen::MatrixXd a(1, 1), b(1, 1);
  a << 0.0;
  b << 2.0;
  const auto u = node_uncertainty(stack({a, b}));
  EXPECT_EQ(u.B_used, 1u);
  EXPECT_DOUBLE_EQ(u.means(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(u.covariances[0](0, 0), 2.0);
}

TEST(Covariance, MatchesBruteForce) {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Eigen::MatrixXd> blocks;
    for (int m = 0; m < 2 + trial % 6; ++m) blocks.push_back(oracle::random_matrix(9, 1 + trial % 4, gen));
    const auto u = node_uncertainty(stack(blocks));
    for (int i = 0; i < 9; ++i) {
      EXPECT_LT((u.covariances[static_cast<std::size_t>(i)] - oracle::node_covariance(blocks, i)).cwiseAbs().maxCoeff(),
                1e-10);
      EXPECT_TRUE(u.covariances[static_cast<std::size_t>(i)].isApprox(u.covariances[static_cast<std::size_t>(i)].transpose()));
    }
  }
}

TEST(Covariance, NeedsAtLeastTwoBlocks) {
  Embedding e;
  e.positions = Eigen::MatrixXd::Zero(4, 2);
  EXPECT_THROW(node_uncertainty(e), InvalidArgument);
}

TEST(Covariance, FromBootstrapBatch) {
  Eigen::MatrixXd B(2, 2);
  B << 0.6, 0.1, 0.1, 0.6;
  std::vector<int> tau(40);
  for (int i = 0; i < 40; ++i) tau[static_cast<std::size_t>(i)] = i % 2;
  const auto A = sample_birg(sbm_probability_matrix({B, tau}), 1);
  BootstrapConfig c;
  c.d = 2;
  const auto batch = Resampler(A, c).batch(6, 3);
  const auto [joint, u] = node_uncertainty(A, batch, 2);
  EXPECT_EQ(joint.block_count(), 7u);
  EXPECT_EQ(u.B_used, 6u);
  EXPECT_EQ(u.n(), 40u);
  const auto j = to_json(u);
  EXPECT_EQ(j["nodes"].size(), 40u);
  EXPECT_EQ(j["nodes"][0]["cov"].size(), 2u);
  EXPECT_EQ(j["B_used"], 6);
}

TEST(Mahalanobis, MatchesDirectSolve) {
  std::mt19937_64 gen(13);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd L = oracle::random_matrix(3, 3, gen);
    NodeUncertainty u;
    u.means = oracle::random_matrix(1, 3, gen);
    u.covariances = {L * L.transpose() + 0.1 * Eigen::MatrixXd::Identity(3, 3)};
    const Eigen::VectorXd x = oracle::random_matrix(3, 1, gen);
    const Eigen::VectorXd delta = x - u.means.row(0).transpose();
    const double expected = std::sqrt(delta.dot(u.covariances[0].ldlt().solve(delta)));
    EXPECT_NEAR(mahalanobis(u, 0, x), expected, 1e-9 * std::max(1.0, expected));
  }
}

TEST(Mahalanobis, SingularCovarianceStaysFinite) {
  NodeUncertainty u;
  u.means = Eigen::MatrixXd::Zero(1, 2);
  u.covariances = {Eigen::MatrixXd::Zero(2, 2)};
  Eigen::VectorXd x(2);
  x << 1e-3, 0.0;
  EXPECT_TRUE(std::isfinite(mahalanobis(u, 0, x)));
  EXPECT_GT(mahalanobis(u, 0, x), 3.0);
}

TEST(Fuzziness, OverlapMustBeMutual) {
  const Eigen::Matrix2d tight = 1e-4 * Eigen::Matrix2d::Identity();
  const Eigen::Matrix2d wide = 10.0 * Eigen::Matrix2d::Identity();
  const auto one_sided = two_nodes({0, 0}, tight, {1, 0}, wide);
  EXPECT_FALSE(fuzziness_matrix(one_sided)(0, 1));
  const auto both = two_nodes({0, 0}, wide, {1, 0}, wide);
  EXPECT_TRUE(fuzziness_matrix(both)(0, 1));
}

TEST(Fuzziness, AnisotropicEllipses) {
  Eigen::Matrix2d along_x;
  along_x << 4.0, 0.0, 0.0, 0.01;
  // Offset of 5 along x is 2.5 SDs; the same offset along y is 50 SDs.
  EXPECT_TRUE(fuzziness_matrix(two_nodes({0, 0}, along_x, {5, 0}, along_x))(0, 1));
  EXPECT_FALSE(fuzziness_matrix(two_nodes({0, 0}, along_x, {0, 5}, along_x))(0, 1));
  EXPECT_FALSE(fuzziness_matrix(two_nodes({0, 0}, along_x, {5, 0}, along_x), 2.0)(0, 1));
}

TEST(Fuzziness, ReflexiveSymmetricAndWorkerIndependent) {
  std::mt19937_64 gen(14);
  std::vector<Eigen::MatrixXd> blocks;
  for (int m = 0; m < 8; ++m) blocks.push_back(oracle::random_matrix(30, 2, gen) * 0.3 + Eigen::MatrixXd::Constant(30, 2, m * 0.01));
  const auto u = node_uncertainty(stack(blocks));
  const auto F = fuzziness_matrix(u, 3.0, 1);
  EXPECT_EQ(F, fuzziness_matrix(u, 3.0, 4));
  for (std::size_t i = 0; i < 30; ++i) {
    EXPECT_TRUE(F(i, i));
    for (std::size_t j = 0; j < 30; ++j) EXPECT_EQ(F(i, j), F(j, i));
  }
  EXPECT_THROW(fuzziness_matrix(u, -1.0), InvalidArgument);
}

TEST(Layout, StandardizeUsesPopulationSd) {
  Eigen::MatrixXd raw(4, 2);
  raw << 0, 10, 2, 10, 4, 20, 6, 20;
  const auto L = Layout2D::standardize(raw, LayoutSource::External);
  for (int c = 0; c < 2; ++c) {
    EXPECT_NEAR(L.positions.col(c).mean(), 0.0, 1e-15);
    EXPECT_NEAR(L.positions.col(c).squaredNorm() / 4.0, 1.0, 1e-12);
  }
  raw.col(1).setConstant(3.0);
  EXPECT_THROW(Layout2D::standardize(raw, LayoutSource::External), NumericalError);
}

TEST(FuzzinessScore, TwoPairLengths) {
  Layout2D L;
  L.positions.resize(3, 2);
  L.positions << 0, 0, 1, 0, 0, 3;
  FuzzinessMatrix F(3, 3.0);
  F.set(0, 1, true);
  F.set(0, 2, true);
  EXPECT_DOUBLE_EQ(fuzziness_score(L, F), 1.0);
}

TEST(FuzzinessScore, NoPairsIsAnError) {
  Layout2D L;
  L.positions = Eigen::MatrixXd::Zero(3, 2);
  EXPECT_THROW(fuzziness_score(L, FuzzinessMatrix(3, 3.0)), InvalidArgument);
  EXPECT_THROW(fuzziness_score(L, FuzzinessMatrix(4, 3.0)), InvalidArgument);
}

TEST(FuzzinessScore, MatchesBruteForce) {
  std::mt19937_64 gen(15);
  std::bernoulli_distribution coin(0.3);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5 + trial;
    Layout2D L;
    L.positions = oracle::random_matrix(n, 2, gen);
    FuzzinessMatrix F(static_cast<std::size_t>(n), 3.0);
    std::vector<std::pair<int, int>> pairs{{0, 1}};
    F.set(0, 1, true);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if ((i || j != 1) && coin(gen)) {
          F.set(static_cast<std::size_t>(i), static_cast<std::size_t>(j), true);
          pairs.emplace_back(i, j);
        }
    EXPECT_NEAR(fuzziness_score(L, F), oracle::fuzziness_score(L.positions, pairs), 1e-10);
  }
}

TEST(LayoutCsv, RoundTripAndErrors) {
  std::mt19937_64 gen(16);
  const auto L = Layout2D::standardize(oracle::random_matrix(6, 2, gen), LayoutSource::External);
  std::stringstream s;
  write_layout_csv(s, L);
  const auto back = read_layout_csv(s, 6);
  EXPECT_LT((back.positions - L.positions).cwiseAbs().maxCoeff(), 1e-12);

  std::istringstream shuffled("node,x,y\n1,0,1\n0,1,0\n2,2,2\n");
  EXPECT_EQ(read_layout_csv(shuffled, 3).positions.rows(), 3);
  std::istringstream repeated("0,0,1\n0,1,0\n");
  EXPECT_THROW(read_layout_csv(repeated, 2), InvalidArgument);
  std::istringstream missing("0,0,1\n");
  EXPECT_THROW(read_layout_csv(missing, 2), InvalidArgument);
  std::istringstream junk("0,a,1\n1,1,0\n");
  EXPECT_THROW(read_layout_csv(junk, 2), InvalidArgument);
}

TEST(FuzzinessEdges, TsvListsUpperPairs) {
  FuzzinessMatrix F(3, 3.0);
  F.set(2, 0, true);
  std::ostringstream out;
  write_fuzziness_edges(out, F);
  EXPECT_EQ(out.str(), "0\t2\n");
}
