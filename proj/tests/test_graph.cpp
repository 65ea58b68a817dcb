#include <gtest/gtest.h>

#include "landscape/graph.hpp"

using namespace landscape;

TEST(Chain, EdgesInCanonicalOrder) {
  auto g = build_chain(4, 2);
  std::vector<std::array<Index, 2>> want{{0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 3}};
  EXPECT_EQ(g.edges(), want);
  EXPECT_EQ(g.edge_count(), 5);
  Index expect_id = 0;
  g.for_each_edge([&](Index id, Index u, Index v) {
    EXPECT_EQ(id, expect_id++);
    EXPECT_EQ(g.edge_index(u, v), id);
    EXPECT_EQ(g.edge_index(v, u), id);
  });
  EXPECT_FALSE(g.edge_index(0, 3).has_value());
}

TEST(Chain, BandEdgeCount) {
  for (Index N : {10, 100, 1000})
    for (int W : {1, 2, 3, 8}) {
      auto g = build_chain(N, W);
      EXPECT_EQ(g.edge_count(), N * W - W * (W + 1) / 2) << N << "," << W;
      EXPECT_TRUE(g.is_band());
      EXPECT_EQ(g.band_width(), W);
    }
}

TEST(Chain, DegreesAndAmbient) {
  auto g = build_chain(6, 2);
  EXPECT_EQ(g.degree(0), 2);
  EXPECT_EQ(g.degree(1), 3);
  EXPECT_EQ(g.degree(2), 4);
  EXPECT_EQ(g.max_ambient_degree(), 4);
  EXPECT_EQ(g.neighbors(2), (std::vector<Index>{0, 1, 3, 4}));
}

TEST(Chain, RejectsBadWidth) {
  EXPECT_THROW(build_chain(5, 0), Error);
  EXPECT_THROW(build_chain(0, 1), Error);
}

TEST(Lattice, SquareGridCounts) {
  auto g = build_lattice(2, 3, 1);
  EXPECT_EQ(g.vertex_count(), 9);
  EXPECT_EQ(g.edge_count(), 12);
  EXPECT_EQ(g.degree(4), 4);
  EXPECT_EQ(g.degree(0), 2);
  EXPECT_EQ(g.max_ambient_degree(), 4);
}

TEST(Lattice, CubeCounts) {
  auto g = build_lattice(3, 4, 1);
  EXPECT_EQ(g.vertex_count(), 64);
  EXPECT_EQ(g.edge_count(), 3 * 16 * 3);
}

TEST(Lattice, OneDimensionalMatchesChain) {
  auto a = build_lattice(1, 12, 2);
  auto b = build_chain(12, 2);
  EXPECT_EQ(a.edges(), b.edges());
}

TEST(Sierpinski, VertexAndEdgeCounts) {
  const Index verts[] = {3, 6, 15, 42, 123, 366};
  for (int m = 0; m <= 5; ++m) {
    auto g = build_sierpinski(m);
    EXPECT_EQ(g.vertex_count(), verts[m]) << "level " << m;
    EXPECT_EQ(sierpinski_vertex_count(m), verts[m]);
    Index e = 3;
    for (int i = 0; i < m; ++i) e *= 3;
    EXPECT_EQ(g.edge_count(), e);
    EXPECT_EQ(sierpinski_edge_count(m), e);
  }
}

TEST(Sierpinski, DegreesAreTwoOrFour) {
  auto g = build_sierpinski(4);
  Index corners = 0;
  for (Index x = 0; x < g.vertex_count(); ++x) {
    const Index d = g.degree(x);
    EXPECT_TRUE(d == 2 || d == 4);
    if (d == 2) ++corners;
  }
  EXPECT_EQ(corners, 3);
  EXPECT_EQ(g.max_ambient_degree(), 4);
}

TEST(Sierpinski, LevelCap) {
  EXPECT_THROW(build_sierpinski(kSierpinskiLevelCap + 1), CapacityError);
  EXPECT_THROW(build_sierpinski(-1), Error);
}

TEST(Adjacency, RejectsAsymmetricInput) {
  std::vector<std::vector<Index>> adj{{1}, {}};
  EXPECT_THROW(GraphTopology::from_adjacency(adj, {1, 1}, {}), Error);
}

TEST(DomainMask, Constructors) {
  auto all = DomainMask::all(5);
  EXPECT_EQ(all.members(), (std::vector<Index>{0, 1, 2, 3, 4}));
  auto iv = DomainMask::interval(6, 1, 3);
  EXPECT_EQ(iv.members(), (std::vector<Index>{1, 2, 3}));
  std::vector<Index> m{4, 0};
  EXPECT_EQ(DomainMask::from_members(5, m).members(), (std::vector<Index>{0, 4}));
  EXPECT_THROW(DomainMask::interval(6, 3, 7), Error);
}

TEST(Metric, ChainDistancesAndInradius) {
  auto g = build_chain(10, 1);
  auto A = DomainMask::all(10);
  auto d = bfs_distances(g, A, 0);
  for (Index x = 0; x < 10; ++x) EXPECT_EQ(d[x], x);
  auto ms = metric_summary(g, A);
  EXPECT_EQ(ms.components, 1);
  EXPECT_EQ(ms.inradius, 5);
  for (Index x = 0; x < 10; ++x) EXPECT_EQ(ms.boundary_distance[x], std::min(x + 1, 10 - x));
}

TEST(Metric, DisconnectedMaskWarns) {
  auto g = build_chain(7, 1);
  std::vector<Index> m{0, 1, 4, 5};
  auto ms = metric_summary(g, DomainMask::from_members(7, m));
  EXPECT_EQ(ms.components, 2);
  EXPECT_FALSE(ms.warnings.empty());
}

TEST(Metric, BallVolumeOnLattice) {
  auto g = build_lattice(2, 9, 1);
  // l1 ball of radius 2 around the centre has 1 + 4 + 8 points.
  EXPECT_EQ(ball_volume(g, 40, 2), 13);
}

TEST(Label, ToString) {
  EXPECT_EQ(build_chain(1000, 2).label().to_string(), "chain(1000,2)");
}
