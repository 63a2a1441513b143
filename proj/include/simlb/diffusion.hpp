#pragma once

#include <span>
#include <vector>

#include "simlb/core_model.hpp"
#include "simlb/neighbor_graph.hpp"

namespace simlb {

enum class AlphaRule {
  MaxDegree,  // alpha_ij = 1 / (max(d_i, d_j) + 1)
  Uniform,    // alpha_ij = DiffusionConfig::uniform_alpha
};

struct DiffusionConfig {
  AlphaRule alpha_rule = AlphaRule::MaxDegree;
  double uniform_alpha = 0.1;
  double eps = 0.05;  // neighborhood stddev threshold, relative to the global mean load
  int max_iters = 100;
};

struct Transfer {
  NodeId from = 0;
  NodeId to = 0;
  double amount = 0.0;
  bool operator==(const Transfer&) const = default;
};

/// Target load to move along each neighbor-graph edge. At most one direction
/// per pair is present and every amount is positive.
struct TransferPlan {
  std::vector<Transfer> transfers;  // sorted by (from, to)

  bool empty() const { return transfers.empty(); }
  double amount(NodeId from, NodeId to) const;
  double outgoing(NodeId from) const;
  bool operator==(const TransferPlan&) const = default;
};

struct DiffusionDiagnostics {
  int iterations = 0;
  bool converged = false;
  double final_spread = 0.0;  // max neighborhood stddev / mean at termination
  int components = 0;         // connected components of the neighbor graph
  std::vector<NodeId> capped_nodes;
};

struct DiffusionResult {
  TransferPlan plan;
  DiffusionDiagnostics diagnostics;
  std::vector<double> virtual_loads;  // last iterate, before capping
};

/// First-order diffusion with Jacobi updates; accumulates the signed flow on
/// every edge, collapses it to one direction, then scales a node's outgoing
/// flows down proportionally if they exceed its initial load.
DiffusionResult virtual_balance(std::span<const double> loads, const NeighborGraph& graph,
                                const DiffusionConfig& cfg = {});

/// Largest population stddev over closed neighborhoods {v} + N(v).
double max_neighborhood_stddev(std::span<const double> loads, const NeighborGraph& graph);

std::vector<double> apply_transfers(std::span<const double> loads, const TransferPlan& plan);

}  // namespace simlb
