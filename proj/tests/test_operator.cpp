#include <gtest/gtest.h>

#include <random>

#include "landscape/operator.hpp"

using namespace landscape;

namespace {

std::shared_ptr<const GraphTopology> share(GraphTopology g) { return std::make_shared<const GraphTopology>(std::move(g)); }

// Reference matrix built straight from the edge list.
Eigen::MatrixXd reference(const GraphTopology& g, const std::vector<double>& hop, const std::vector<double>& V,
                          Normalization norm) {
  const Index n = g.vertex_count();
  const double deg = g.max_ambient_degree();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  for (Index x = 0; x < n; ++x) {
    const double v = V.empty() ? 0.0 : V[x];
    H(x, x) = norm == Normalization::Combinatorial ? deg * (1.0 + v) : 1.0 + v;
  }
  g.for_each_edge([&](Index e, Index u, Index w) {
    const double a = hop.empty() ? 1.0 : hop[e];
    const double off = norm == Normalization::Combinatorial ? -a : -a / deg;
    H(u, w) = H(w, u) = off;
  });
  return H;
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST(Assemble, FreeChainMatrix) {
  auto op = assemble({share(build_chain(3, 1)), {}, {}, {}, Normalization::Combinatorial});
  Eigen::MatrixXd want(3, 3);
  want << 2, -1, 0, -1, 2, -1, 0, -1, 2;
  EXPECT_EQ(to_dense(op), want);
  EXPECT_EQ(op.storage_name(), "tridiagonal");
}

TEST(Assemble, ProbabilisticChain) {
  std::vector<double> hop{0.5, 1.0};
  auto op = assemble({share(build_chain(3, 1)), {}, hop, {}, Normalization::Probabilistic});
  Eigen::MatrixXd want(3, 3);
  want << 1, -0.25, 0, -0.25, 1, -0.5, 0, -0.5, 1;
  EXPECT_EQ(to_dense(op), want);
  ASSERT_EQ(op.weights().size(), 3u);
  EXPECT_EQ(op.weights()[0], 2.0);
}

TEST(Assemble, StorageByGraph) {
  EXPECT_EQ(assemble({share(build_chain(20, 1))}).storage_name(), "tridiagonal");
  EXPECT_EQ(assemble({share(build_chain(20, 3))}).storage_name(), "banded");
  EXPECT_EQ(assemble({share(build_lattice(2, 5, 1))}).storage_name(), "sparse");
  EXPECT_EQ(assemble({share(build_sierpinski(3))}).storage_name(), "sparse");
}

class AssembleMatches : public ::testing::TestWithParam<std::tuple<int, Normalization>> {};

TEST_P(AssembleMatches, Reference) {
  const auto [which, norm] = GetParam();
  GraphTopology g = which == 0   ? build_chain(30, 1)
                    : which == 1 ? build_chain(30, 4)
                    : which == 2 ? build_lattice(2, 6, 2)
                                 : build_sierpinski(3);
  auto gp = share(g);
  auto hop = random_vector(static_cast<std::size_t>(g.edge_count()), 11 + which);
  auto V = random_vector(static_cast<std::size_t>(g.vertex_count()), 99 + which, 0.0, 2.0);
  auto op = assemble({gp, {}, hop, V, norm});
  Eigen::MatrixXd H = reference(g, hop, V, norm);
  EXPECT_LT((to_dense(op) - H).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((Eigen::MatrixXd(to_sparse(op)) - H).cwiseAbs().maxCoeff(), 1e-15);

  auto f = random_vector(static_cast<std::size_t>(g.vertex_count()), 5, -1.0, 1.0);
  auto hf = apply_operator(op, f);
  Eigen::VectorXd ref = H * Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Index>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(hf[i], ref[static_cast<Index>(i)], 1e-13);
  for (Index i = 0; i < H.rows(); ++i)
    for (Index j = 0; j < H.cols(); ++j) EXPECT_EQ(op.entry(i, j), H(i, j));
}

INSTANTIATE_TEST_SUITE_P(Graphs, AssembleMatches,
                         ::testing::Combine(::testing::Values(0, 1, 2, 3),
                                            ::testing::Values(Normalization::Combinatorial,
                                                              Normalization::Probabilistic)));

TEST(Assemble, MaskRestricts) {
  auto g = share(build_chain(6, 1));
  auto op = assemble({g, DomainMask::interval(6, 2, 4), {}, {}, Normalization::Combinatorial});
  EXPECT_EQ(op.dimension(), 3);
  EXPECT_EQ(op.vertex_of(0), 2);
  Eigen::MatrixXd want(3, 3);
  want << 2, -1, 0, -1, 2, -1, 0, -1, 2;
  EXPECT_EQ(to_dense(op), want);
}

TEST(Assemble, RejectsBadInput) {
  auto g = share(build_chain(4, 1));
  EXPECT_THROW(assemble({g, {}, {0.5, 0.5}, {}, Normalization::Combinatorial}), ValidationError);
  EXPECT_THROW(assemble({g, {}, {0.5, 1.5, 0.5}, {}, Normalization::Combinatorial}), ValidationError);
  EXPECT_THROW(assemble({g, {}, {}, {0, -1, 0, 0}, Normalization::Combinatorial}), ValidationError);
  EXPECT_THROW(assemble({nullptr}), ValidationError);
}

TEST(Assemble, ProbabilisticNeedsConstantAmbientDegree) {
  std::vector<std::vector<Index>> adj{{1}, {0, 2}, {1}};
  auto g = share(GraphTopology::from_adjacency(adj, {1, 2, 1}, {}));
  EXPECT_THROW(assemble({g, {}, {}, {}, Normalization::Probabilistic}), UnsupportedNormalization);
  EXPECT_NO_THROW(assemble({g, {}, {}, {}, Normalization::Combinatorial}));
}

TEST(Assemble, HashTracksSpec) {
  auto g = share(build_chain(5, 1));
  auto a = assemble({g, {}, {1, 1, 0.5, 1}, {}, Normalization::Combinatorial});
  auto b = assemble({g, {}, {1, 1, 0.5, 1}, {}, Normalization::Combinatorial});
  auto c = assemble({g, {}, {1, 1, 0.25, 1}, {}, Normalization::Combinatorial});
  EXPECT_EQ(a.spec_hash(), b.spec_hash());
  EXPECT_NE(a.spec_hash(), c.spec_hash());
}

TEST(QuadraticForm, MatchesDenseForm) {
  auto g = share(build_chain(40, 2));
  auto hop = random_vector(static_cast<std::size_t>(g->edge_count()), 3);
  auto op = assemble({g, {}, hop, {}, Normalization::Probabilistic});
  auto f = random_vector(40, 8, -1.0, 1.0);
  Eigen::Map<const Eigen::VectorXd> fv(f.data(), 40);
  const Eigen::MatrixXd H = to_dense(op);
  auto q = quadratic_form(op, f);
  EXPECT_NEAR(q.plain, fv.dot(H * fv), 1e-12);
  ASSERT_TRUE(q.weighted.has_value());
  EXPECT_NEAR(*q.weighted, 4.0 * q.plain, 1e-12);
  EXPECT_GT(q.plain, 0.0);
}

TEST(Scale, MultipliesEntries) {
  auto op = assemble({share(build_chain(10, 2)), {}, {}, {}, Normalization::Combinatorial});
  auto s = scale(op, 3.0);
  EXPECT_EQ(to_dense(s), 3.0 * to_dense(op));
  EXPECT_NE(s.spec_hash(), op.spec_hash());
  EXPECT_THROW(scale(op, 0.0), ValidationError);
}

TEST(Gershgorin, BracketsSpectrum) {
  auto op = assemble({share(build_lattice(2, 6, 1)), {}, {}, {}, Normalization::Combinatorial});
  auto [lo, hi] = gershgorin(op);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_dense(op));
  EXPECT_LE(lo, es.eigenvalues().minCoeff());
  EXPECT_GE(hi, es.eigenvalues().maxCoeff());
  EXPECT_DOUBLE_EQ(norm_inf(op), 8.0);
}

TEST(FreeLaplacian, Helpers) {
  EXPECT_EQ(to_dense(free_laplacian(4)), to_dense(assemble({share(build_chain(4, 1))})));
  std::vector<double> c{0.5, 0.8};
  Eigen::MatrixXd want(3, 3);
  want << 2, -0.5, 0, -0.5, 2, -0.8, 0, -0.8, 2;
  EXPECT_EQ(to_dense(hopping_chain(c)), want);
}

TEST(Dense, CapEnforced) { EXPECT_THROW(to_dense(free_laplacian(kDenseCap + 1)), CapacityError); }
