#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "simlb/core_model.hpp"
#include "simlb/diffusion.hpp"
#include "simlb/migration.hpp"
#include "simlb/neighbor_graph.hpp"

namespace simlb {

enum class StrategyKind { None, DiffComm, DiffCoord, GreedyRefine };

std::string_view to_string(StrategyKind kind);
/// Accepts "none", "diff-comm", "diff-coord", "greedy-refine".
std::optional<StrategyKind> parse_strategy(std::string_view name);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::DiffComm;
  int k = 4;
  int max_rounds = 0;  // handshake rounds; 0 selects 2k + 4
  TieBreak tie_break = TieBreak::LowerId;
  std::uint64_t seed = 0;
  bool allow_noncomm_neighbors = false;
  DiffusionConfig diffusion;
  double greedy_tol = 0.01;
  double thread_eps = 0.02;

  HandshakeConfig handshake() const { return {k, max_rounds, tie_break, seed}; }
};

struct StrategyDiagnostics {
  std::optional<NeighborDiagnostics> neighbors;
  std::optional<DiffusionDiagnostics> diffusion;
  std::vector<UnmetTransfer> transfers;
  std::size_t graph_edges = 0;
};

struct StrategyOutcome {
  MigrationPlan plan;
  StrategyDiagnostics diagnostics;
  std::optional<NeighborGraph> graph;
  TransferPlan transfers;
  double wall_seconds = 0.0;
};

/// Neighbor graph -> virtual diffusion -> object selection -> thread
/// refinement for the diffusion strategies; the baselines skip straight to a
/// plan. Wall time covers the whole pipeline.
StrategyOutcome run_strategy(const WorkloadSnapshot& s, const StrategyConfig& cfg);

}  // namespace simlb
