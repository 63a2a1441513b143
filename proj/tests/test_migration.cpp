#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "simlb/generators.hpp"
#include "simlb/metrics.hpp"
#include "simlb/migration.hpp"
#include "simlb/strategy.hpp"
#include "support/oracles.hpp"
#include "support/scenarios.hpp"

using namespace simlb;
using namespace simlb::testing;

namespace {

TransferPlan single(NodeId from, NodeId to, double amount) { return TransferPlan{{{from, to, amount}}}; }

// Node 0 holds objects 0 and 1 (load 3 each); object 2 sits on node 1.
WorkloadSnapshot three_objects(double bytes_to_first, double bytes_to_second) {
  WorkloadSnapshot s;
  s.node_count = 2;
  s.coord_dims = 1;
  s.objects = {{0, 0, 0, 3.0, {0.0}}, {1, 0, 0, 3.0, {1.0}}, {2, 1, 0, 1.0, {5.0}}};
  if (bytes_to_first > 0) s.edges.push_back({0, 2, bytes_to_first});
  if (bytes_to_second > 0) s.edges.push_back({1, 2, bytes_to_second});
  return s;
}

}  // namespace

TEST(SelectComm, ZeroTransfersEmptyPlan) {
  std::mt19937_64 gen(1);
  const auto s = random_snapshot(gen, 3, 12, 20);
  EXPECT_TRUE(select_objects_comm(s, {}).plan.empty());
}

TEST(SelectComm, BytesDecide) {
  const auto a = select_objects_comm(three_objects(0, 10), single(0, 1, 3.0));
  EXPECT_EQ(a.plan.moves, (std::vector<Move>{{1, 0, 1}}));
  const auto b = select_objects_comm(three_objects(10, 0), single(0, 1, 3.0));
  EXPECT_EQ(b.plan.moves, (std::vector<Move>{{0, 0, 1}}));
}

TEST(SelectComm, MidpointRule) {
  // T = 1.4: a 3-load object overshoots by more than it helps, so nothing moves.
  EXPECT_TRUE(select_objects_comm(three_objects(10, 0), single(0, 1, 1.4)).plan.empty());
  // T = 1.5: exactly at the midpoint, accepted.
  EXPECT_EQ(select_objects_comm(three_objects(10, 0), single(0, 1, 1.5)).plan.moves.size(), 1u);
  // T = 4.4: one object, then 3 + 1.5 > 4.4 stops the second.
  const auto r = select_objects_comm(three_objects(10, 0), single(0, 1, 4.4));
  EXPECT_EQ(r.plan.moves.size(), 1u);
  EXPECT_DOUBLE_EQ(r.transfers[0].sent, 3.0);
}

TEST(SelectComm, ZeroByteFallbackByLoad) {
  WorkloadSnapshot s;
  s.node_count = 2;
  s.objects = {{0, 0, 0, 1.0, {}}, {1, 0, 0, 4.0, {}}, {2, 0, 0, 2.0, {}}, {3, 1, 0, 1.0, {}}};
  s.edges = {{0, 3, 1.0}};
  const auto r = select_objects_comm(s, single(0, 1, 5.0));
  // Object 0 has bytes toward node 1 and goes first; then load-descending.
  EXPECT_EQ(r.plan.moves, (std::vector<Move>{{0, 0, 1}, {1, 0, 1}}));
}

TEST(SelectComm, IncrementalBytesChangeOrder) {
  // 0 talks to node 1's object 3; 1 talks only to object 0; 2 has slightly
  // more initial bytes toward node 1 than 1 does. Once 0 moves, 1 becomes
  // the best candidate.
  WorkloadSnapshot s;
  s.node_count = 2;
  s.objects = {{0, 0, 0, 1.0, {}}, {1, 0, 0, 1.0, {}}, {2, 0, 0, 1.0, {}}, {3, 1, 0, 1.0, {}}};
  s.edges = {{0, 3, 9.0}, {0, 1, 5.0}, {2, 3, 2.0}};
  const auto r = select_objects_comm(s, single(0, 1, 2.0));
  EXPECT_EQ(r.plan.moves, (std::vector<Move>{{0, 0, 1}, {1, 0, 1}}));
}

TEST(SelectComm, NeighborsInDescendingTransferOrder) {
  WorkloadSnapshot s;
  s.node_count = 3;
  s.objects = {{0, 0, 0, 2.0, {}}, {1, 0, 0, 2.0, {}}, {2, 1, 0, 1.0, {}}, {3, 2, 0, 1.0, {}}};
  s.edges = {{0, 2, 1.0}, {1, 3, 1.0}};
  // Both objects fit toward node 2 first because its transfer is larger.
  TransferPlan plan{{{0, 1, 2.0}, {0, 2, 4.0}}};
  const auto r = select_objects_comm(s, plan);
  EXPECT_EQ(r.plan.moves, (std::vector<Move>{{1, 0, 2}, {0, 0, 2}}));
  ASSERT_EQ(r.transfers.size(), 2u);
  EXPECT_EQ(r.transfers[1].to, 1);
  EXPECT_DOUBLE_EQ(r.transfers[1].sent, 0.0);
  EXPECT_TRUE(r.transfers[1].source_exhausted);
}

TEST(SelectComm, MidpointBoundProperty) {
  std::mt19937_64 gen(41);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = random_snapshot(gen, 2 + trial % 6, 40, 80);
    const auto g = build_comm_neighbors(node_comm_matrix(s), s.node_count, {3, 0, TieBreak::LowerId, 0}).graph;
    const auto plan = virtual_balance(node_loads(s), g).plan;
    for (const auto* variant : {"comm", "coord"}) {
      const auto r = std::string(variant) == "comm"
                         ? select_objects_comm(s, plan)
                         : select_objects_coord(s, plan, compute_centroids(s).points);
      EXPECT_TRUE(is_single_hop(r.plan, g));
      std::vector<double> max_load(static_cast<std::size_t>(s.node_count), 0.0);
      for (const auto& o : s.objects)
        max_load[static_cast<std::size_t>(o.home_node)] = std::max(max_load[static_cast<std::size_t>(o.home_node)], o.load);
      for (const auto& t : r.transfers) {
        if (t.source_exhausted) continue;
        EXPECT_LE(std::abs(t.sent - t.requested), max_load[static_cast<std::size_t>(t.from)] / 2 + 1e-12);
      }
      // Moves come only from the original node (no chained hops).
      for (const auto& mv : r.plan.moves) EXPECT_EQ(mv.from_node, s.objects[static_cast<std::size_t>(mv.object)].home_node);
      EXPECT_EQ(r.plan, (std::string(variant) == "comm" ? select_objects_comm(s, plan)
                                                        : select_objects_coord(s, plan, compute_centroids(s).points))
                            .plan);
    }
  }
}

TEST(ObjectCommTableTest, MatchesRecomputation) {
  std::mt19937_64 gen(43);
  for (int trial = 0; trial < 60; ++trial) {
    const int nodes = 2 + trial % 5;
    const auto s = random_snapshot(gen, nodes, 30, 70);
    ObjectCommTable table(s);
    std::vector<NodeId> home;
    for (const auto& o : s.objects) home.push_back(o.home_node);
    for (int step = 0; step < 25; ++step) {
      const auto o = static_cast<ObjectId>(gen() % 30);
      const auto to = static_cast<NodeId>(gen() % static_cast<unsigned>(nodes));
      table.move(o, to);
      home[static_cast<std::size_t>(o)] = to;
      EXPECT_EQ(table.home(o), to);
      const auto oracle = oracle_object_comm(s, home);
      const auto fresh = table.recompute();
      for (std::size_t i = 0; i < oracle.size(); ++i) {
        for (NodeId v = 0; v < nodes; ++v) {
          auto it = oracle[i].find(v);
          const double want = it == oracle[i].end() ? 0.0 : it->second;
          EXPECT_NEAR(table.bytes_toward(static_cast<ObjectId>(i), v), want, 1e-9);
        }
        ASSERT_EQ(fresh[i].size(), table.row(static_cast<ObjectId>(i)).size());
      }
    }
  }
}

TEST(SelectCoord, CoincidentObjectMoves) {
  WorkloadSnapshot s;
  s.node_count = 2;
  s.coord_dims = 2;
  s.objects = {{0, 0, 0, 2.0, {9.0, 9.0}}, {1, 0, 0, 2.0, {1.0, 0.0}}, {2, 1, 0, 1.0, {1.0, 0.0}}};
  const auto r = select_objects_coord(s, single(0, 1, 2.0), compute_centroids(s).points);
  EXPECT_EQ(r.plan.moves, (std::vector<Move>{{1, 0, 1}}));
}

TEST(SelectCoord, CentroidFollowsMoves) {
  std::mt19937_64 gen(47);
  for (int trial = 0; trial < 40; ++trial) {
    const auto s = random_snapshot(gen, 3, 20, 0);
    CentroidTracker tracker(s, compute_centroids(s).points);
    std::vector<NodeId> home;
    for (const auto& o : s.objects) home.push_back(o.home_node);
    for (int step = 0; step < 20; ++step) {
      const auto o = static_cast<ObjectId>(gen() % 20);
      const NodeId from = home[static_cast<std::size_t>(o)];
      const NodeId to = static_cast<NodeId>((from + 1 + gen() % 2) % 3);
      if (tracker.count(from) == 1) {
        // Moving the only object off a node: the destination mean still holds.
        tracker.move(s.objects[static_cast<std::size_t>(o)].coords, from, to);
        home[static_cast<std::size_t>(o)] = to;
        const auto want = oracle_centroid(s, home, to);
        const auto got = tracker.centroid(to);
        EXPECT_NEAR(got[0], want[0], 1e-9);
        EXPECT_NEAR(got[1], want[1], 1e-9);
        EXPECT_EQ(tracker.count(from), 0u);
        break;
      }
      tracker.move(s.objects[static_cast<std::size_t>(o)].coords, from, to);
      home[static_cast<std::size_t>(o)] = to;
      for (NodeId v : {from, to}) {
        const auto want = oracle_centroid(s, home, v);
        const auto got = tracker.centroid(v);
        EXPECT_NEAR(got[0], want[0], 1e-9);
        EXPECT_NEAR(got[1], want[1], 1e-9);
        EXPECT_NEAR(tracker.distance_sq(s.objects[0].coords, v),
                    std::pow(s.objects[0].coords[0] - want[0], 2) + std::pow(s.objects[0].coords[1] - want[1], 2),
                    1e-9);
      }
    }
  }
}

TEST(SelectCoord, NeedsCoordinates) {
  WorkloadSnapshot s;
  s.node_count = 2;
  s.objects = {{0, 0, 0, 1.0, {}}};
  EXPECT_THROW(select_objects_coord(s, single(0, 1, 1.0), {{}, {}}), std::invalid_argument);
}

TEST(TiledRandomSelection, Bands) {
  const auto s = gen_stencil(tiled_random_spec());
  const auto init = compute_metrics(s);
  const auto comm = one_round(s, strategy(StrategyKind::DiffComm, 4)).report.final_metrics;
  const auto coord = one_round(s, strategy(StrategyKind::DiffCoord, 4)).report.final_metrics;
  EXPECT_LE(comm.max_avg_load, 1.10);
  EXPECT_LE(comm.ext_int_ratio, 1.6 * init.ext_int_ratio);
  EXPECT_LE(coord.max_avg_load, 1.10);
  EXPECT_LE(coord.ext_int_ratio, 1.5 * comm.ext_int_ratio);
}

TEST(Threads, SingleThreadNoMoves) {
  std::mt19937_64 gen(53);
  EXPECT_TRUE(refine_threads(random_snapshot(gen, 2, 10, 0, 1)).empty());
}

TEST(Threads, IndivisibleObjectStays) {
  WorkloadSnapshot s;
  s.threads_per_node = 2;
  s.objects = {{0, 0, 0, 5.0, {}}, {1, 0, 1, 1.0, {}}, {2, 0, 1, 1.0, {}}, {3, 0, 1, 1.0, {}}};
  EXPECT_TRUE(refine_threads(s).empty());
}

namespace {

// Steepest descent over single moves from a heaviest to a lightest thread:
// every candidate object is tried and the one giving the lowest new peak wins
// (smaller load, then lower id, on ties).
std::vector<int> oracle_best_fit(const std::vector<double>& loads, std::vector<int> thread, int threads) {
  for (;;) {
    std::vector<double> tl(static_cast<std::size_t>(threads), 0.0);
    for (std::size_t o = 0; o < loads.size(); ++o) tl[static_cast<std::size_t>(thread[o])] += loads[o];
    const int h = static_cast<int>(std::max_element(tl.begin(), tl.end()) - tl.begin());
    const int l = static_cast<int>(std::min_element(tl.begin(), tl.end()) - tl.begin());
    int pick = -1;
    double best_peak = tl[static_cast<std::size_t>(h)];
    for (std::size_t o = 0; o < loads.size(); ++o) {
      if (thread[o] != h) continue;
      const double peak = std::max(tl[static_cast<std::size_t>(h)] - loads[o], tl[static_cast<std::size_t>(l)] + loads[o]);
      if (peak < best_peak || (pick >= 0 && peak == best_peak && loads[o] < loads[static_cast<std::size_t>(pick)])) {
        pick = static_cast<int>(o);
        best_peak = peak;
      }
    }
    if (pick < 0) return thread;
    thread[static_cast<std::size_t>(pick)] = l;
  }
}

}  // namespace

TEST(Threads, AgainstExhaustiveOracles) {
  std::mt19937_64 gen(59);
  std::uniform_int_distribution<int> load(1, 12), coin(0, 1);
  int reaches_optimum = 0;
  const int trials = 300;
  for (int trial = 0; trial < trials; ++trial) {
    WorkloadSnapshot s;
    s.threads_per_node = 2;
    std::vector<double> loads;
    std::vector<int> thread;
    for (int i = 0; i < 8; ++i) {
      loads.push_back(load(gen));
      thread.push_back(coin(gen));
      s.objects.push_back({i, 0, thread.back(), loads.back(), {}});
    }
    const auto after = apply_plan(s, {{}, refine_threads(s, 0.0)});
    std::vector<double> tl(2, 0.0);
    for (const auto& o : after.objects) tl[static_cast<std::size_t>(o.home_thread)] += o.load;
    const double got = std::max(tl[0], tl[1]);

    const auto want = oracle_best_fit(loads, thread, 2);
    for (std::size_t o = 0; o < want.size(); ++o) EXPECT_EQ(after.objects[o].home_thread, want[o]) << "trial " << trial;

    // No single move from the heavier thread lowers the peak any further.
    const int h = tl[0] >= tl[1] ? 0 : 1;
    for (const auto& o : after.objects) {
      if (o.home_thread == h) EXPECT_GE(tl[static_cast<std::size_t>(1 - h)] + o.load, got);
    }
    // The best any move sequence can reach bounds the greedy result below.
    const double best = oracle_thread_refinement(loads, thread, 2);
    EXPECT_LE(best, got);
    reaches_optimum += got == best;
  }
  // A greedy rule does not always find the best sequence; the rate is
  // recorded rather than asserted.
  RecordProperty("reaches_sequence_optimum", reaches_optimum);
  std::printf("thread refinement reached the sequence optimum in %d of %d instances\n", reaches_optimum, trials);
}

TEST(Threads, StopsWithinTolerance) {
  std::mt19937_64 gen(61);
  for (int trial = 0; trial < 50; ++trial) {
    auto s = random_snapshot(gen, 1, 24, 0, 4);
    const auto after = apply_plan(s, {{}, refine_threads(s, 0.02)});
    std::vector<double> tl(4, 0.0), before(4, 0.0);
    for (const auto& o : after.objects) tl[static_cast<std::size_t>(o.home_thread)] += o.load;
    for (const auto& o : s.objects) before[static_cast<std::size_t>(o.home_thread)] += o.load;
    EXPECT_LE(*std::max_element(tl.begin(), tl.end()), *std::max_element(before.begin(), before.end()));
  }
}

TEST(Strategy, NodeMovesThenThreadRefinement) {
  StencilSpec spec = tiled_random_spec();
  spec.grid_dims = {32, 32};
  spec.threads_per_node = 4;
  const auto s = gen_stencil(spec);
  const auto out = run_strategy(s, strategy(StrategyKind::DiffComm, 4));
  EXPECT_FALSE(out.plan.moves.empty());
  const auto after = apply_plan(s, out.plan);
  for (NodeId v = 0; v < s.node_count; ++v) {
    std::vector<double> tl(4, 0.0);
    double total = 0.0;
    for (const auto& o : after.objects) {
      if (o.home_node != v) continue;
      tl[static_cast<std::size_t>(o.home_thread)] += o.load;
      total += o.load;
    }
    const double mx = *std::max_element(tl.begin(), tl.end());
    // Either within tolerance or no single move could help.
    if (mx > 1.02 * total / 4) {
      const double mn = *std::min_element(tl.begin(), tl.end());
      for (const auto& o : after.objects) {
        if (o.home_node == v && tl[static_cast<std::size_t>(o.home_thread)] == mx) EXPECT_GE(mn + o.load, mx);
      }
    }
  }
}

TEST(Strategy, ParseNames) {
  for (auto k : {StrategyKind::None, StrategyKind::DiffComm, StrategyKind::DiffCoord, StrategyKind::GreedyRefine}) {
    EXPECT_EQ(parse_strategy(to_string(k)), k);
  }
  EXPECT_FALSE(parse_strategy("metis").has_value());
}
