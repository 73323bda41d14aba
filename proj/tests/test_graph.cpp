#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "oracles.hpp"
#include "sgtraj/graph.hpp"

using namespace sgtraj;
using namespace sgtraj::oracle;

TEST(StarEdges, SizeIsTwoMPlusOne) {
  for (std::size_t m = 0; m <= 8; ++m) {
    EdgeSet es = build_star_edges(m);
    EXPECT_EQ(es.size(), 2 * m + 1);
    EXPECT_EQ(es.num_nodes, m + 1);
    EXPECT_NO_THROW(es.validate());
  }
}

TEST(StarEdges, TwoNeighborInstance) {
  EdgeSet es = build_star_edges(2);
  std::set<Edge> got(es.edges.begin(), es.edges.end());
  std::set<Edge> want{{0, 0}, {0, 1}, {0, 2}, {1, 0}, {2, 0}};
  EXPECT_EQ(got, want);
}

TEST(StarEdges, SelfLoopOnlyForNoNeighbors) {
  EXPECT_EQ(build_star_edges(0).edges, (std::vector<Edge>{{0, 0}}));
}

TEST(StarEdges, RejectsMoreThanEight) { EXPECT_THROW(build_star_edges(9), ContractError); }

TEST(EdgeSetValidate, RejectsDuplicatesAndRange) {
  EXPECT_THROW((EdgeSet{2, {{0, 1}, {0, 1}}}.validate()), GraphError);
  EXPECT_THROW((EdgeSet{2, {{0, 2}}}.validate()), GraphError);
}

TEST(Neighbors, SingleVehicleAhead) {
  Snapshot s{{1, 2, 5.5, 100.0}, {2, 2, 5.5, 120.0}};
  NeighborSlots n = select_neighbors(s, 1);
  EXPECT_EQ(n.slot[0], std::optional<VehicleId>(2));
  for (std::size_t k = 1; k < 8; ++k) EXPECT_FALSE(n.slot[k]);
}

TEST(Neighbors, LeftmostLaneHasNoLeftSlots) {
  Snapshot s{{1, 1, 1.8, 100.0}, {2, 2, 5.5, 102.0}, {3, 2, 5.5, 130.0}, {4, 2, 5.5, 80.0}};
  NeighborSlots n = select_neighbors(s, 1);
  EXPECT_FALSE(n.slot[2]);
  EXPECT_FALSE(n.slot[4]);
  EXPECT_FALSE(n.slot[5]);
  EXPECT_EQ(n.slot[3], std::optional<VehicleId>(2));
  EXPECT_EQ(n.slot[6], std::optional<VehicleId>(3));
  EXPECT_EQ(n.slot[7], std::optional<VehicleId>(4));
}

TEST(Neighbors, RampLanesNeverNeighbors) {
  Snapshot s{{1, 6, 20.0, 100.0}, {2, 7, 24.0, 101.0}, {3, 6, 20.0, 90.0}};
  NeighborSlots n = select_neighbors(s, 1);
  EXPECT_EQ(n.ids(), (std::vector<VehicleId>{3}));
}

TEST(Neighbors, EquidistantAdjacentPrefersAhead) {
  Snapshot s{{1, 3, 9.0, 100.0}, {2, 2, 5.5, 95.0}, {3, 2, 5.5, 105.0}};
  EXPECT_EQ(select_neighbors(s, 1).slot[2], std::optional<VehicleId>(3));
}

TEST(Neighbors, MissingTargetIsLookupError) {
  Snapshot s{{1, 2, 5.5, 0.0}};
  EXPECT_THROW(select_neighbors(s, 9), LookupError);
}

TEST(Neighbors, DuplicateIdsRejected) {
  Snapshot s{{1, 2, 5.5, 0.0}, {1, 3, 9.0, 4.0}};
  EXPECT_THROW(select_neighbors(s, 1), ContractError);
}

TEST(Neighbors, AgreesWithBruteForceOracle) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    Snapshot s = random_snapshot(rng, 12);
    VehicleId target = s[rng() % s.size()].id;
    NeighborSlots got = select_neighbors(s, target);
    ASSERT_EQ(got, neighbor_oracle(s, target)) << "trial " << trial;
  }
}

TEST(Neighbors, StructuralProperties) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 500; ++trial) {
    Snapshot s = random_snapshot(rng, 12);
    const auto& t = s[rng() % s.size()];
    NeighborSlots n = select_neighbors(s, t.id);
    auto ids = n.ids();
    EXPECT_EQ(std::set<VehicleId>(ids.begin(), ids.end()).size(), ids.size());
    EXPECT_EQ(std::count(ids.begin(), ids.end(), t.id), 0);
    if (n.slot[0]) {
      for (const auto& v : s)
        if (v.id == *n.slot[0]) EXPECT_GT(v.y, t.y);
    }
  }
}

// ---------------------------------------------------------------------------
// MTP graph

TEST(MtpGraph, SingleTargetIsStarAroundTarget) {
  Snapshot s{{10, 3, 9.0, 100.0}, {20, 3, 9.0, 120.0}};
  MtpGraph g = build_mtp_graph(s, 10, {20}, {});
  EXPECT_EQ(g.node_ids, (std::vector<VehicleId>{10, 20}));
  std::set<Edge> got(g.edges.edges.begin(), g.edges.edges.end());
  EXPECT_EQ(got, (std::set<Edge>{{0, 0}, {1, 1}, {1, 0}, {0, 1}}));
}

TEST(MtpGraph, MatchesSetUnionOracle) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    Snapshot s = random_snapshot(rng, 14);
    const VehicleId ego = s[0].id;
    auto nb = select_neighbors(s, ego).ids();
    if (nb.empty()) continue;
    std::vector<VehicleId> targets(nb.begin(), nb.begin() + std::min<std::size_t>(nb.size(), 1 + rng() % 8));
    std::set<VehicleId> used(targets.begin(), targets.end());
    used.insert(ego);
    std::vector<VehicleId> others;
    for (const auto& v : s)
      if (!used.count(v.id) && rng() % 2) others.push_back(v.id);

    MtpGraph g = build_mtp_graph(s, ego, targets, others);
    std::map<VehicleId, std::size_t> node;
    for (std::size_t i = 0; i < g.node_ids.size(); ++i) node[g.node_ids[i]] = i;
    std::set<Edge> want;
    for (std::size_t i = 0; i < g.node_ids.size(); ++i) want.insert({i, i});
    for (VehicleId t : targets)
      for (VehicleId n : select_neighbors(s, t).ids())
        if (node.count(n)) {
          want.insert({node[t], node[n]});
          want.insert({node[n], node[t]});
        }
    std::set<Edge> got(g.edges.edges.begin(), g.edges.edges.end());
    ASSERT_EQ(got.size(), g.edges.size()) << "duplicate edges";
    ASSERT_EQ(got, want);
    EXPECT_LE(g.node_ids.size(), g.edges.size());
    EXPECT_EQ(g.num_targets, targets.size());
    for (std::size_t k = 0; k < targets.size(); ++k) EXPECT_EQ(g.node_ids[k + 1], targets[k]);
  }
}

TEST(MtpGraph, SharedNeighborHasInEdgesFromBothTargets) {
  // Targets 2 and 3 both see vehicle 4 (3's follower and 2's right-lane neighbor).
  Snapshot s{{1, 2, 5.5, 100.0}, {2, 2, 5.5, 120.0}, {3, 3, 9.0, 140.0}, {4, 3, 9.0, 118.0}};
  MtpGraph g = build_mtp_graph(s, 1, {2, 3}, {4});
  EXPECT_TRUE(g.edges.contains({3, 1}));  // node of id 4 hears target 2
  EXPECT_TRUE(g.edges.contains({3, 2}));  // and target 3
  EXPECT_NO_THROW(g.edges.validate());
}

TEST(MtpGraph, RejectsBadTargetCountsAndOverlap) {
  Snapshot s{{1, 2, 5.5, 100.0}, {2, 2, 5.5, 120.0}};
  EXPECT_THROW(build_mtp_graph(s, 1, {}, {}), ContractError);
  EXPECT_THROW(build_mtp_graph(s, 1, {2}, {2}), ContractError);
  EXPECT_THROW(build_mtp_graph(s, 1, {1}, {}), ContractError);
  EXPECT_THROW(build_mtp_graph(s, 1, {2, 3, 4, 5, 6, 7, 8, 9, 10}, {}), ContractError);
}
