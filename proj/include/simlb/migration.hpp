#pragma once

#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "simlb/core_model.hpp"
#include "simlb/diffusion.hpp"
#include "simlb/neighbor_graph.hpp"

namespace simlb {

class StalePlanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-object bytes exchanged with each node, kept consistent with a
/// placement that changes while objects are being selected.
class ObjectCommTable {
 public:
  explicit ObjectCommTable(const WorkloadSnapshot& s);

  NodeId home(ObjectId o) const { return home_[static_cast<std::size_t>(o)]; }
  double bytes_toward(ObjectId o, NodeId node) const;

  /// Nonzero (node, bytes) entries for o, ascending node id.
  const std::vector<std::pair<NodeId, double>>& row(ObjectId o) const { return rows_[static_cast<std::size_t>(o)]; }

  /// Moves o and updates the rows of every object that talks to it.
  void move(ObjectId o, NodeId to);

  /// Rebuilds every row from the current placement; used to cross-check the
  /// incremental updates.
  std::vector<std::vector<std::pair<NodeId, double>>> recompute() const;

 private:
  void add(ObjectId o, NodeId node, double bytes);

  std::vector<NodeId> home_;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::vector<std::vector<std::pair<NodeId, double>>> rows_;
};

/// Per-node coordinate sums so centroids follow objects as they move.
class CentroidTracker {
 public:
  CentroidTracker(const WorkloadSnapshot& s, const std::vector<std::vector<double>>& initial);

  std::vector<double> centroid(NodeId node) const;
  double distance_sq(std::span<const double> point, NodeId node) const;
  void move(std::span<const double> coords, NodeId from, NodeId to);
  std::size_t count(NodeId node) const { return count_[static_cast<std::size_t>(node)]; }

 private:
  std::vector<std::vector<double>> sums_;
  std::vector<std::size_t> count_;
  std::vector<std::vector<double>> fallback_;
};

struct UnmetTransfer {
  NodeId from = 0;
  NodeId to = 0;
  double requested = 0.0;
  double sent = 0.0;
  bool source_exhausted = false;
};

struct SelectionResult {
  MigrationPlan plan;
  std::vector<UnmetTransfer> transfers;  // realized amount for every planned transfer
};

/// Picks objects for each planned transfer, preferring the ones that exchange
/// the most bytes with the destination. An object is accepted only while
/// sent + load/2 <= requested.
SelectionResult select_objects_comm(const WorkloadSnapshot& s, const TransferPlan& plan);

/// Same skeleton, preferring objects closest to the destination's centroid.
SelectionResult select_objects_coord(const WorkloadSnapshot& s, const TransferPlan& plan,
                                     const std::vector<std::vector<double>>& centroids);

/// Within-node balancing across threads; considers load only.
std::vector<ThreadMove> refine_threads(const WorkloadSnapshot& s, double eps_t = 0.02);

/// Throws StalePlanError naming the first object whose move does not match s.
void check_plan(const WorkloadSnapshot& s, const MigrationPlan& m);

/// Returns false when some move does not follow a neighbor-graph edge.
bool is_single_hop(const MigrationPlan& m, const NeighborGraph& g);

/// Moves objects (and then threads) per the plan. Loads and edges are copied
/// unchanged. Objects keep their thread index when they change node.
WorkloadSnapshot apply_plan(const WorkloadSnapshot& s, const MigrationPlan& m);

}  // namespace simlb
