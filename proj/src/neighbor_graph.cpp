#include "simlb/neighbor_graph.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "simlb/rng.hpp"

namespace simlb {

NeighborGraph::NeighborGraph(int node_count, int k)
    : node_count_(node_count), k_(k), adj_(static_cast<std::size_t>(node_count)) {}

bool NeighborGraph::add_edge(NodeId a, NodeId b) {
  if (a == b || a < 0 || b < 0 || a >= node_count_ || b >= node_count_) {
    throw std::out_of_range("neighbor graph edge out of range");
  }
  auto& la = adj_[static_cast<std::size_t>(a)];
  auto it = std::lower_bound(la.begin(), la.end(), b);
  if (it != la.end() && *it == b) return false;
  la.insert(it, b);
  auto& lb = adj_[static_cast<std::size_t>(b)];
  lb.insert(std::lower_bound(lb.begin(), lb.end(), a), a);
  return true;
}

bool NeighborGraph::adjacent(NodeId a, NodeId b) const {
  if (a < 0 || a >= node_count_) return false;
  const auto& la = adj_[static_cast<std::size_t>(a)];
  return std::binary_search(la.begin(), la.end(), b);
}

std::vector<NodePair> NeighborGraph::edges() const {
  std::vector<NodePair> out;
  for (NodeId v = 0; v < node_count_; ++v) {
    for (NodeId w : adj_[static_cast<std::size_t>(v)]) {
      if (v < w) out.emplace_back(v, w);
    }
  }
  return out;
}

std::size_t NeighborGraph::edge_count() const {
  std::size_t twice = 0;
  for (const auto& l : adj_) twice += l.size();
  return twice / 2;
}

std::vector<std::uint64_t> tie_break_ranks(int node_count, const HandshakeConfig& cfg) {
  std::vector<std::uint64_t> rank(static_cast<std::size_t>(node_count));
  std::iota(rank.begin(), rank.end(), 0);
  if (cfg.tie_break == TieBreak::Seeded) {
    Rng rng(cfg.seed);
    for (std::size_t i = rank.size(); i > 1; --i) std::swap(rank[i - 1], rank[rng.below(i)]);
  }
  return rank;
}

NeighborResult run_handshake(const std::vector<std::vector<NodeId>>& rankings, const HandshakeConfig& cfg) {
  if (cfg.k < 1) throw std::invalid_argument("neighbor count k must be at least 1");
  const int n = static_cast<int>(rankings.size());
  const auto un = static_cast<std::size_t>(n);
  const int k = cfg.k;

  NeighborResult result{NeighborGraph(n, k), {}};
  auto& graph = result.graph;

  // preference[v][w]: position of w in v's ranking (n when absent).
  std::vector<std::vector<int>> preference(un, std::vector<int>(un, n));
  for (std::size_t v = 0; v < un; ++v) {
    for (std::size_t p = 0; p < rankings[v].size(); ++p) {
      preference[v][static_cast<std::size_t>(rankings[v][p])] = static_cast<int>(p);
    }
  }
  std::vector<std::vector<char>> tried(un, std::vector<char>(un, 0));
  std::vector<int> holds(un, 0);
  std::vector<std::vector<NodeId>> held_for(un);
  std::vector<std::vector<NodeId>> incoming(un);
  std::vector<std::vector<NodeId>> accepted(un);

  auto confirmed = [&](NodeId v) { return graph.degree(v); };
  auto release_hold = [&](NodeId holder, NodeId requester) {
    auto& h = held_for[static_cast<std::size_t>(holder)];
    auto it = std::find(h.begin(), h.end(), requester);
    if (it == h.end()) return false;
    h.erase(it);
    --holds[static_cast<std::size_t>(holder)];
    return true;
  };

  const int max_rounds = cfg.effective_max_rounds();
  for (int round = 0; round < max_rounds; ++round) {
    for (auto& v : incoming) v.clear();
    for (auto& v : accepted) v.clear();
    std::fill(holds.begin(), holds.end(), 0);
    for (auto& h : held_for) h.clear();

    // Request phase: each node asks its best ceil(l/2) untried candidates.
    bool any_request = false;
    for (NodeId v = 0; v < n; ++v) {
      const int missing = k - confirmed(v);
      if (missing <= 0) continue;
      int budget = (missing + 1) / 2;
      for (NodeId w : rankings[static_cast<std::size_t>(v)]) {
        if (budget == 0) break;
        if (tried[static_cast<std::size_t>(v)][static_cast<std::size_t>(w)] || graph.adjacent(v, w)) continue;
        incoming[static_cast<std::size_t>(w)].push_back(v);
        --budget;
        any_request = true;
      }
    }
    if (!any_request) break;
    result.diagnostics.rounds_used = round + 1;

    // Respond phase: receivers take requests in their own preference order.
    for (NodeId w = 0; w < n; ++w) {
      auto& reqs = incoming[static_cast<std::size_t>(w)];
      const auto& pref = preference[static_cast<std::size_t>(w)];
      std::sort(reqs.begin(), reqs.end(), [&](NodeId a, NodeId b) {
        const auto pa = pref[static_cast<std::size_t>(a)];
        const auto pb = pref[static_cast<std::size_t>(b)];
        return pa != pb ? pa < pb : a < b;
      });
      for (NodeId v : reqs) {
        const int conf = confirmed(w);
        if (conf >= k || conf + holds[static_cast<std::size_t>(w)] >= k) {
          tried[static_cast<std::size_t>(v)][static_cast<std::size_t>(w)] = 1;
          continue;
        }
        ++holds[static_cast<std::size_t>(w)];
        held_for[static_cast<std::size_t>(w)].push_back(v);
        accepted[static_cast<std::size_t>(v)].push_back(w);
      }
    }

    // Confirm phase: a requester pairs only if its confirmed count plus the
    // holds it granted to others still leaves room.
    for (NodeId v = 0; v < n; ++v) {
      auto& acc = accepted[static_cast<std::size_t>(v)];
      const auto& pref = preference[static_cast<std::size_t>(v)];
      std::sort(acc.begin(), acc.end(), [&](NodeId a, NodeId b) {
        const auto pa = pref[static_cast<std::size_t>(a)];
        const auto pb = pref[static_cast<std::size_t>(b)];
        return pa != pb ? pa < pb : a < b;
      });
      for (NodeId w : acc) {
        if (graph.adjacent(v, w)) {
          release_hold(w, v);
          continue;
        }
        const auto& mine = held_for[static_cast<std::size_t>(v)];
        const bool mutual = std::find(mine.begin(), mine.end(), w) != mine.end();
        const int other_holds = holds[static_cast<std::size_t>(v)] - (mutual ? 1 : 0);
        if (confirmed(v) + other_holds < k) {
          graph.add_edge(v, w);
          release_hold(w, v);
          if (mutual) release_hold(v, w);
          tried[static_cast<std::size_t>(v)][static_cast<std::size_t>(w)] = 1;
          tried[static_cast<std::size_t>(w)][static_cast<std::size_t>(v)] = 1;
        } else {
          release_hold(w, v);
        }
      }
    }
  }

  for (NodeId v = 0; v < n; ++v) {
    const auto candidates = static_cast<int>(rankings[static_cast<std::size_t>(v)].size());
    if (candidates == 0) {
      result.diagnostics.isolated.push_back(v);
    } else if (graph.degree(v) < std::min(k, candidates)) {
      result.diagnostics.unfilled.push_back(v);
    }
  }
  return result;
}

NeighborResult build_comm_neighbors(const NodeCommMatrix& matrix, int node_count, const HandshakeConfig& cfg,
                                    bool allow_noncommunicating) {
  const auto un = static_cast<std::size_t>(node_count);
  std::vector<std::vector<std::pair<double, NodeId>>> partners(un);
  for (const auto& [pair, bytes] : matrix) {
    if (!(bytes > 0.0)) continue;
    if (pair.first < 0 || pair.second >= node_count) throw std::out_of_range("comm matrix node out of range");
    partners[static_cast<std::size_t>(pair.first)].emplace_back(bytes, pair.second);
    partners[static_cast<std::size_t>(pair.second)].emplace_back(bytes, pair.first);
  }
  const auto rank = tie_break_ranks(node_count, cfg);
  std::vector<std::vector<NodeId>> rankings(un);
  for (std::size_t v = 0; v < un; ++v) {
    auto& p = partners[v];
    std::sort(p.begin(), p.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return rank[static_cast<std::size_t>(a.second)] < rank[static_cast<std::size_t>(b.second)];
    });
    for (const auto& [bytes, w] : p) rankings[v].push_back(w);
    if (allow_noncommunicating) {
      std::vector<NodeId> rest;
      for (NodeId w = 0; w < node_count; ++w) {
        if (static_cast<std::size_t>(w) == v) continue;
        if (std::find(rankings[v].begin(), rankings[v].end(), w) == rankings[v].end()) rest.push_back(w);
      }
      std::sort(rest.begin(), rest.end(), [&](NodeId a, NodeId b) {
        return rank[static_cast<std::size_t>(a)] < rank[static_cast<std::size_t>(b)];
      });
      rankings[v].insert(rankings[v].end(), rest.begin(), rest.end());
    }
  }
  return run_handshake(rankings, cfg);
}

NeighborResult build_coord_neighbors(const std::vector<std::vector<double>>& centroids, const HandshakeConfig& cfg) {
  const auto n = centroids.size();
  const auto rank = tie_break_ranks(static_cast<int>(n), cfg);
  std::vector<std::vector<NodeId>> rankings(n);
  std::vector<std::pair<double, NodeId>> dist;
  for (std::size_t v = 0; v < n; ++v) {
    dist.clear();
    for (std::size_t w = 0; w < n; ++w) {
      if (w == v) continue;
      double d2 = 0.0;
      for (std::size_t d = 0; d < centroids[v].size(); ++d) {
        const double delta = centroids[v][d] - centroids[w][d];
        d2 += delta * delta;
      }
      dist.emplace_back(d2, static_cast<NodeId>(w));
    }
    std::sort(dist.begin(), dist.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return rank[static_cast<std::size_t>(a.second)] < rank[static_cast<std::size_t>(b.second)];
    });
    for (const auto& [d2, w] : dist) rankings[v].push_back(w);
  }
  return run_handshake(rankings, cfg);
}

Centroids compute_centroids(const WorkloadSnapshot& s) {
  if (!s.has_coords()) throw std::invalid_argument("snapshot has no coordinates");
  const auto n = static_cast<std::size_t>(s.node_count);
  const auto dims = static_cast<std::size_t>(s.coord_dims);
  Centroids c;
  c.points.assign(n, std::vector<double>(dims, 0.0));
  std::vector<std::size_t> count(n, 0);
  for (const auto& o : s.objects) {
    auto& p = c.points[static_cast<std::size_t>(o.home_node)];
    for (std::size_t d = 0; d < dims; ++d) p[d] += o.coords[d];
    ++count[static_cast<std::size_t>(o.home_node)];
  }
  std::vector<double> mean_of_others(dims, 0.0);
  std::size_t filled = 0;
  for (std::size_t v = 0; v < n; ++v) {
    if (count[v] == 0) {
      c.empty_nodes.push_back(static_cast<NodeId>(v));
      continue;
    }
    for (std::size_t d = 0; d < dims; ++d) {
      c.points[v][d] /= static_cast<double>(count[v]);
      mean_of_others[d] += c.points[v][d];
    }
    ++filled;
  }
  if (filled > 0) {
    for (auto& x : mean_of_others) x /= static_cast<double>(filled);
  }
  for (NodeId v : c.empty_nodes) c.points[static_cast<std::size_t>(v)] = mean_of_others;
  return c;
}

}  // namespace simlb
