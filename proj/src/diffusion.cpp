#include "simlb/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace simlb {

double TransferPlan::amount(NodeId from, NodeId to) const {
  auto it = std::lower_bound(transfers.begin(), transfers.end(), std::pair{from, to},
                             [](const Transfer& t, const std::pair<NodeId, NodeId>& k) {
                               return std::pair{t.from, t.to} < k;
                             });
  return (it != transfers.end() && it->from == from && it->to == to) ? it->amount : 0.0;
}

double TransferPlan::outgoing(NodeId from) const {
  double sum = 0.0;
  for (const auto& t : transfers) {
    if (t.from == from) sum += t.amount;
  }
  return sum;
}

double max_neighborhood_stddev(std::span<const double> loads, const NeighborGraph& graph) {
  double worst = 0.0;
  for (NodeId v = 0; v < graph.node_count(); ++v) {
    const auto& nb = graph.neighbors(v);
    if (nb.empty()) continue;
    double sum = loads[static_cast<std::size_t>(v)];
    for (NodeId w : nb) sum += loads[static_cast<std::size_t>(w)];
    const double count = static_cast<double>(nb.size() + 1);
    const double mean = sum / count;
    double sq = (loads[static_cast<std::size_t>(v)] - mean) * (loads[static_cast<std::size_t>(v)] - mean);
    for (NodeId w : nb) sq += (loads[static_cast<std::size_t>(w)] - mean) * (loads[static_cast<std::size_t>(w)] - mean);
    worst = std::max(worst, std::sqrt(sq / count));
  }
  return worst;
}

namespace {

int count_components(const NeighborGraph& g) {
  std::vector<char> seen(static_cast<std::size_t>(g.node_count()), 0);
  std::vector<NodeId> stack;
  int components = 0;
  for (NodeId s = 0; s < g.node_count(); ++s) {
    if (seen[static_cast<std::size_t>(s)]) continue;
    ++components;
    stack.push_back(s);
    seen[static_cast<std::size_t>(s)] = 1;
    while (!stack.empty()) {
      const NodeId v = stack.back();
      stack.pop_back();
      for (NodeId w : g.neighbors(v)) {
        if (!seen[static_cast<std::size_t>(w)]) {
          seen[static_cast<std::size_t>(w)] = 1;
          stack.push_back(w);
        }
      }
    }
  }
  return components;
}

}  // namespace

DiffusionResult virtual_balance(std::span<const double> loads, const NeighborGraph& graph,
                                const DiffusionConfig& cfg) {
  if (static_cast<int>(loads.size()) != graph.node_count()) {
    throw std::invalid_argument("load vector size does not match neighbor graph");
  }
  if (!(cfg.eps > 0.0)) throw std::invalid_argument("diffusion eps must be positive");
  if (cfg.max_iters < 0) throw std::invalid_argument("diffusion max_iters must be nonnegative");
  for (double l : loads) {
    if (!(l >= 0.0)) throw std::invalid_argument("node loads must be nonnegative");
  }

  DiffusionResult result;
  result.diagnostics.components = count_components(graph);
  const auto edges = graph.edges();

  std::vector<double> alpha(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (cfg.alpha_rule == AlphaRule::Uniform) {
      alpha[e] = cfg.uniform_alpha;
    } else {
      alpha[e] = 1.0 / (std::max(graph.degree(edges[e].first), graph.degree(edges[e].second)) + 1);
    }
  }

  double total = 0.0;
  for (double l : loads) total += l;
  const double mean = loads.empty() ? 0.0 : total / static_cast<double>(loads.size());
  const double threshold = cfg.eps * mean;

  std::vector<double> cur(loads.begin(), loads.end());
  std::vector<double> next(cur.size());
  std::vector<double> flow(edges.size(), 0.0);  // signed, positive means first -> second

  auto& diag = result.diagnostics;
  double spread = max_neighborhood_stddev(cur, graph);
  while (true) {
    if (spread <= threshold) {
      diag.converged = true;
      break;
    }
    if (diag.iterations >= cfg.max_iters) break;
    next = cur;
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const auto i = static_cast<std::size_t>(edges[e].first);
      const auto j = static_cast<std::size_t>(edges[e].second);
      const double f = alpha[e] * (cur[i] - cur[j]);
      flow[e] += f;
      next[i] -= f;
      next[j] += f;
    }
    cur.swap(next);
    ++diag.iterations;
    spread = max_neighborhood_stddev(cur, graph);
  }
  diag.final_spread = mean > 0.0 ? spread / mean : 0.0;
  result.virtual_loads = cur;

  // Collapse to one direction per edge, dropping accumulation noise.
  const double noise = 1e-12 * std::max(mean, 1e-300);
  std::vector<Transfer> transfers;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (std::abs(flow[e]) <= noise) continue;
    if (flow[e] > 0.0) {
      transfers.push_back({edges[e].first, edges[e].second, flow[e]});
    } else {
      transfers.push_back({edges[e].second, edges[e].first, -flow[e]});
    }
  }

  std::sort(transfers.begin(), transfers.end(),
            [](const Transfer& a, const Transfer& b) { return std::pair{a.from, a.to} < std::pair{b.from, b.to}; });

  // Single-hop cap: a node can send at most the load it started with.
  std::vector<double> out(loads.size(), 0.0);
  for (const auto& t : transfers) out[static_cast<std::size_t>(t.from)] += t.amount;
  for (std::size_t v = 0; v < out.size(); ++v) {
    if (!(out[v] > loads[v])) continue;
    diag.capped_nodes.push_back(static_cast<NodeId>(v));
    // Rounding in the rescale must not push the sum back over the cap.
    double scale = loads[v] / out[v];
    for (;;) {
      double sum = 0.0;
      for (const auto& t : transfers) {
        if (static_cast<std::size_t>(t.from) == v) sum += t.amount * scale;
      }
      if (sum <= loads[v]) break;
      scale = std::nextafter(scale, 0.0);
    }
    for (auto& t : transfers) {
      if (static_cast<std::size_t>(t.from) == v) t.amount *= scale;
    }
  }
  std::erase_if(transfers, [](const Transfer& t) { return !(t.amount > 0.0); });
  result.plan.transfers = std::move(transfers);
  return result;
}

std::vector<double> apply_transfers(std::span<const double> loads, const TransferPlan& plan) {
  std::vector<double> out(loads.begin(), loads.end());
  for (const auto& t : plan.transfers) {
    out[static_cast<std::size_t>(t.from)] -= t.amount;
    out[static_cast<std::size_t>(t.to)] += t.amount;
  }
  return out;
}

}  // namespace simlb
