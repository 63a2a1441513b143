#include "simlb/strategy.hpp"

#include <chrono>
#include <stdexcept>

#include "simlb/baselines.hpp"

namespace simlb {

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::None: return "none";
    case StrategyKind::DiffComm: return "diff-comm";
    case StrategyKind::DiffCoord: return "diff-coord";
    case StrategyKind::GreedyRefine: return "greedy-refine";
  }
  return "unknown";
}

std::optional<StrategyKind> parse_strategy(std::string_view name) {
  for (auto k : {StrategyKind::None, StrategyKind::DiffComm, StrategyKind::DiffCoord, StrategyKind::GreedyRefine}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

StrategyOutcome run_strategy(const WorkloadSnapshot& s, const StrategyConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  StrategyOutcome out;

  switch (cfg.kind) {
    case StrategyKind::None:
      out.plan = no_lb(s);
      break;
    case StrategyKind::GreedyRefine:
      out.plan = greedy_refine(s, cfg.greedy_tol);
      break;
    case StrategyKind::DiffComm:
    case StrategyKind::DiffCoord: {
      std::vector<std::vector<double>> centroids;
      NeighborResult nr;
      if (cfg.kind == StrategyKind::DiffComm) {
        nr = build_comm_neighbors(node_comm_matrix(s), s.node_count, cfg.handshake(), cfg.allow_noncomm_neighbors);
      } else {
        auto c = compute_centroids(s);
        centroids = std::move(c.points);
        nr = build_coord_neighbors(centroids, cfg.handshake());
        nr.diagnostics.empty_nodes = std::move(c.empty_nodes);
      }
      const auto loads = node_loads(s);
      auto diff = virtual_balance(loads, nr.graph, cfg.diffusion);
      SelectionResult sel = cfg.kind == StrategyKind::DiffComm
                                ? select_objects_comm(s, diff.plan)
                                : select_objects_coord(s, diff.plan, centroids);
      out.plan = std::move(sel.plan);
      if (!is_single_hop(out.plan, nr.graph)) throw std::logic_error("object selection produced a multi-hop move");
      out.diagnostics.neighbors = nr.diagnostics;
      out.diagnostics.diffusion = diff.diagnostics;
      out.diagnostics.transfers = std::move(sel.transfers);
      out.diagnostics.graph_edges = nr.graph.edge_count();
      out.transfers = std::move(diff.plan);
      out.graph = std::move(nr.graph);
      break;
    }
  }

  if (s.threads_per_node > 1) {
    MigrationPlan node_only{out.plan.moves, {}};
    out.plan.thread_moves = refine_threads(apply_plan(s, node_only), cfg.thread_eps);
  }

  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace simlb
