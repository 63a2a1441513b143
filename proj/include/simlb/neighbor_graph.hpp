#pragma once

#include <cstdint>
#include <vector>

#include "simlb/core_model.hpp"

namespace simlb {

/// Symmetric node adjacency restricting which node pairs may exchange
/// objects during one load-balancing round.
class NeighborGraph {
 public:
  NeighborGraph() = default;
  NeighborGraph(int node_count, int k);

  int node_count() const { return node_count_; }
  int k() const { return k_; }

  /// Inserts the unordered pair; returns false when it already existed.
  bool add_edge(NodeId a, NodeId b);
  bool adjacent(NodeId a, NodeId b) const;
  int degree(NodeId v) const { return static_cast<int>(adj_[static_cast<std::size_t>(v)].size()); }

  /// Neighbors of v in ascending id order.
  const std::vector<NodeId>& neighbors(NodeId v) const { return adj_[static_cast<std::size_t>(v)]; }

  /// All pairs (first < second) in ascending order.
  std::vector<NodePair> edges() const;
  std::size_t edge_count() const;

  bool operator==(const NeighborGraph&) const = default;

 private:
  int node_count_ = 0;
  int k_ = 0;
  std::vector<std::vector<NodeId>> adj_;
};

enum class TieBreak {
  LowerId,  // equal-score candidates ordered by ascending node id
  Seeded,   // equal-score candidates ordered by a seeded permutation of ids
};

struct HandshakeConfig {
  int k = 4;
  int max_rounds = 0;  // 0 selects 2k + 4
  TieBreak tie_break = TieBreak::LowerId;
  std::uint64_t seed = 0;

  int effective_max_rounds() const { return max_rounds > 0 ? max_rounds : 2 * k + 4; }
};

struct NeighborDiagnostics {
  int rounds_used = 0;
  std::vector<NodeId> isolated;     // no candidates at all
  std::vector<NodeId> unfilled;     // ended below min(k, candidate count)
  std::vector<NodeId> empty_nodes;  // coordinate variant: no objects, centroid synthesized
};

struct NeighborResult {
  NeighborGraph graph;
  NeighborDiagnostics diagnostics;
};

/// Runs the request / accept-with-hold / confirm handshake as synchronous
/// rounds. `rankings[v]` lists v's candidates best first. Holds that are not
/// confirmed within the round they were granted expire at its end.
NeighborResult run_handshake(const std::vector<std::vector<NodeId>>& rankings, const HandshakeConfig& cfg);

/// Candidates ranked by descending inter-node bytes. With
/// `allow_noncommunicating`, nodes sharing no bytes are appended after all
/// communicating partners so that k can exceed the number of partners.
NeighborResult build_comm_neighbors(const NodeCommMatrix& matrix, int node_count, const HandshakeConfig& cfg,
                                    bool allow_noncommunicating = false);

/// Candidates are all other nodes ranked by ascending Euclidean centroid
/// distance. Distances are not periodic.
NeighborResult build_coord_neighbors(const std::vector<std::vector<double>>& centroids, const HandshakeConfig& cfg);

struct Centroids {
  std::vector<std::vector<double>> points;
  std::vector<NodeId> empty_nodes;
};

/// Unweighted mean coordinate per node. A node without objects receives the
/// mean of the other nodes' centroids and is listed in `empty_nodes`.
Centroids compute_centroids(const WorkloadSnapshot& s);

/// Permutation rank used for seeded tie-breaking: rank[v] orders node v.
std::vector<std::uint64_t> tie_break_ranks(int node_count, const HandshakeConfig& cfg);

}  // namespace simlb
