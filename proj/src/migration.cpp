#include "simlb/migration.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <fmt/format.h>

namespace simlb {

// ---------------------------------------------------------------------------
// ObjectCommTable

ObjectCommTable::ObjectCommTable(const WorkloadSnapshot& s)
    : adjacency_(object_adjacency(s)), rows_(s.objects.size()) {
  home_.reserve(s.objects.size());
  for (const auto& o : s.objects) home_.push_back(o.home_node);
  rows_ = recompute();
}

double ObjectCommTable::bytes_toward(ObjectId o, NodeId node) const {
  const auto& r = rows_[static_cast<std::size_t>(o)];
  auto it = std::lower_bound(r.begin(), r.end(), node, [](const auto& e, NodeId n) { return e.first < n; });
  return (it != r.end() && it->first == node) ? it->second : 0.0;
}

void ObjectCommTable::add(ObjectId o, NodeId node, double bytes) {
  auto& r = rows_[static_cast<std::size_t>(o)];
  auto it = std::lower_bound(r.begin(), r.end(), node, [](const auto& e, NodeId n) { return e.first < n; });
  if (it != r.end() && it->first == node) {
    const double before = it->second;
    it->second += bytes;
    // Cancellation leaves rounding residue; treat it as no traffic.
    if (it->second <= 1e-9 * std::max(std::abs(before), std::abs(bytes))) r.erase(it);
  } else if (bytes > 0.0) {
    r.insert(it, {node, bytes});
  }
}

void ObjectCommTable::move(ObjectId o, NodeId to) {
  const NodeId from = home_[static_cast<std::size_t>(o)];
  if (from == to) return;
  for (const auto& nb : adjacency_[static_cast<std::size_t>(o)]) {
    if (nb.bytes == 0.0) continue;
    add(nb.other, from, -nb.bytes);
    add(nb.other, to, nb.bytes);
  }
  home_[static_cast<std::size_t>(o)] = to;
}

std::vector<std::vector<std::pair<NodeId, double>>> ObjectCommTable::recompute() const {
  std::vector<std::vector<std::pair<NodeId, double>>> rows(adjacency_.size());
  for (std::size_t o = 0; o < adjacency_.size(); ++o) {
    auto& r = rows[o];
    for (const auto& nb : adjacency_[o]) {
      if (nb.bytes == 0.0) continue;
      const NodeId node = home_[static_cast<std::size_t>(nb.other)];
      auto it = std::lower_bound(r.begin(), r.end(), node, [](const auto& e, NodeId n) { return e.first < n; });
      if (it != r.end() && it->first == node) {
        it->second += nb.bytes;
      } else {
        r.insert(it, {node, nb.bytes});
      }
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// CentroidTracker

CentroidTracker::CentroidTracker(const WorkloadSnapshot& s, const std::vector<std::vector<double>>& initial)
    : sums_(static_cast<std::size_t>(s.node_count), std::vector<double>(static_cast<std::size_t>(s.coord_dims), 0.0)),
      count_(static_cast<std::size_t>(s.node_count), 0),
      fallback_(initial) {
  if (static_cast<int>(initial.size()) != s.node_count) {
    throw std::invalid_argument("centroid count does not match node count");
  }
  for (const auto& o : s.objects) {
    auto& sum = sums_[static_cast<std::size_t>(o.home_node)];
    for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += o.coords[d];
    ++count_[static_cast<std::size_t>(o.home_node)];
  }
}

std::vector<double> CentroidTracker::centroid(NodeId node) const {
  const auto v = static_cast<std::size_t>(node);
  if (count_[v] == 0) return fallback_[v];
  std::vector<double> c = sums_[v];
  for (auto& x : c) x /= static_cast<double>(count_[v]);
  return c;
}

double CentroidTracker::distance_sq(std::span<const double> point, NodeId node) const {
  const auto v = static_cast<std::size_t>(node);
  double d2 = 0.0;
  for (std::size_t d = 0; d < point.size(); ++d) {
    const double c = count_[v] == 0 ? fallback_[v][d] : sums_[v][d] / static_cast<double>(count_[v]);
    d2 += (point[d] - c) * (point[d] - c);
  }
  return d2;
}

void CentroidTracker::move(std::span<const double> coords, NodeId from, NodeId to) {
  auto& src = sums_[static_cast<std::size_t>(from)];
  auto& dst = sums_[static_cast<std::size_t>(to)];
  for (std::size_t d = 0; d < coords.size(); ++d) {
    src[d] -= coords[d];
    dst[d] += coords[d];
  }
  --count_[static_cast<std::size_t>(from)];
  ++count_[static_cast<std::size_t>(to)];
  if (count_[static_cast<std::size_t>(from)] == 0) std::fill(src.begin(), src.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Object selection

namespace {

/// Returns true when candidate a should be picked before b.
using Better = std::function<bool(ObjectId a, ObjectId b, NodeId dest)>;
using OnMove = std::function<void(ObjectId o, NodeId from, NodeId to)>;

SelectionResult select_objects(const WorkloadSnapshot& s, const TransferPlan& plan, const Better& better,
                               const OnMove& on_move) {
  SelectionResult result;
  std::vector<std::vector<ObjectId>> resident(static_cast<std::size_t>(s.node_count));
  for (const auto& o : s.objects) resident[static_cast<std::size_t>(o.home_node)].push_back(o.id);
  std::vector<char> migrated(s.objects.size(), 0);

  for (NodeId i = 0; i < s.node_count; ++i) {
    std::vector<Transfer> out;
    for (const auto& t : plan.transfers) {
      if (t.from == i) out.push_back(t);
    }
    std::stable_sort(out.begin(), out.end(), [](const Transfer& a, const Transfer& b) {
      return a.amount != b.amount ? a.amount > b.amount : a.to < b.to;
    });

    auto& pool = resident[static_cast<std::size_t>(i)];
    for (const auto& t : out) {
      double sent = 0.0;
      for (;;) {
        const double room = t.amount - sent;
        ObjectId best = -1;
        for (ObjectId o : pool) {
          if (migrated[static_cast<std::size_t>(o)]) continue;
          const double load = s.objects[static_cast<std::size_t>(o)].load;
          if (!(load > 0.0) || load / 2.0 > room) continue;
          if (best < 0 || better(o, best, t.to)) best = o;
        }
        if (best < 0) break;
        migrated[static_cast<std::size_t>(best)] = 1;
        sent += s.objects[static_cast<std::size_t>(best)].load;
        result.plan.moves.push_back({best, i, t.to});
        on_move(best, i, t.to);
      }
      const bool exhausted = std::none_of(pool.begin(), pool.end(), [&](ObjectId o) {
        return !migrated[static_cast<std::size_t>(o)] && s.objects[static_cast<std::size_t>(o)].load > 0.0;
      });
      result.transfers.push_back({i, t.to, t.amount, sent, exhausted});
    }
  }
  return result;
}

}  // namespace

SelectionResult select_objects_comm(const WorkloadSnapshot& s, const TransferPlan& plan) {
  ObjectCommTable table(s);
  auto better = [&](ObjectId a, ObjectId b, NodeId dest) {
    const double ba = table.bytes_toward(a, dest);
    const double bb = table.bytes_toward(b, dest);
    if (ba != bb) return ba > bb;
    const double la = s.objects[static_cast<std::size_t>(a)].load;
    const double lb = s.objects[static_cast<std::size_t>(b)].load;
    if (la != lb) return la > lb;
    return a < b;
  };
  auto on_move = [&](ObjectId o, NodeId, NodeId to) { table.move(o, to); };
  return select_objects(s, plan, better, on_move);
}

SelectionResult select_objects_coord(const WorkloadSnapshot& s, const TransferPlan& plan,
                                     const std::vector<std::vector<double>>& centroids) {
  if (!s.has_coords()) throw std::invalid_argument("coordinate selection needs object coordinates");
  CentroidTracker tracker(s, centroids);
  NodeId cached_dest = -1;
  std::vector<double> dist;  // per object distance to cached_dest's current centroid
  bool stale = true;
  auto distance = [&](ObjectId o, NodeId dest) {
    if (dest != cached_dest || stale) {
      cached_dest = dest;
      stale = false;
      dist.assign(s.objects.size(), -1.0);
    }
    auto& d = dist[static_cast<std::size_t>(o)];
    if (d < 0.0) d = tracker.distance_sq(s.objects[static_cast<std::size_t>(o)].coords, dest);
    return d;
  };
  auto better = [&](ObjectId a, ObjectId b, NodeId dest) {
    const double da = distance(a, dest);
    const double db = distance(b, dest);
    if (da != db) return da < db;
    const double la = s.objects[static_cast<std::size_t>(a)].load;
    const double lb = s.objects[static_cast<std::size_t>(b)].load;
    if (la != lb) return la > lb;
    return a < b;
  };
  auto on_move = [&](ObjectId o, NodeId from, NodeId to) {
    tracker.move(s.objects[static_cast<std::size_t>(o)].coords, from, to);
    stale = true;
  };
  return select_objects(s, plan, better, on_move);
}

// ---------------------------------------------------------------------------
// Thread refinement

std::vector<ThreadMove> refine_threads(const WorkloadSnapshot& s, double eps_t) {
  std::vector<ThreadMove> moves;
  const int threads = s.threads_per_node;
  if (threads <= 1) return moves;

  std::vector<std::vector<ObjectId>> by_node(static_cast<std::size_t>(s.node_count));
  for (const auto& o : s.objects) by_node[static_cast<std::size_t>(o.home_node)].push_back(o.id);

  std::vector<int> thread_of(s.objects.size());
  for (const auto& o : s.objects) thread_of[static_cast<std::size_t>(o.id)] = o.home_thread;

  for (const auto& objs : by_node) {
    if (objs.empty()) continue;
    std::vector<double> tload(static_cast<std::size_t>(threads), 0.0);
    double total = 0.0;
    for (ObjectId o : objs) {
      tload[static_cast<std::size_t>(thread_of[static_cast<std::size_t>(o)])] += s.objects[static_cast<std::size_t>(o)].load;
      total += s.objects[static_cast<std::size_t>(o)].load;
    }
    const double mean = total / threads;
    // Every accepted move strictly lowers the sum of squared thread loads, so
    // the loop terminates; the cap only guards against pathological inputs.
    const std::size_t cap = objs.size() * static_cast<std::size_t>(threads) * 4 + 16;
    for (std::size_t iter = 0; iter < cap; ++iter) {
      const auto heavy = static_cast<int>(std::max_element(tload.begin(), tload.end()) - tload.begin());
      const auto light = static_cast<int>(std::min_element(tload.begin(), tload.end()) - tload.begin());
      const double hl = tload[static_cast<std::size_t>(heavy)];
      const double ll = tload[static_cast<std::size_t>(light)];
      if (hl <= (1.0 + eps_t) * mean || heavy == light) break;
      // Best single move: minimize the larger of the two resulting loads.
      ObjectId best = -1;
      double best_peak = hl;
      for (ObjectId o : objs) {
        if (thread_of[static_cast<std::size_t>(o)] != heavy) continue;
        const double load = s.objects[static_cast<std::size_t>(o)].load;
        if (!(load > 0.0) || !(ll + load < hl)) continue;
        const double peak = std::max(hl - load, ll + load);
        if (peak < best_peak || (peak == best_peak && best >= 0 &&
                                 (load < s.objects[static_cast<std::size_t>(best)].load ||
                                  (load == s.objects[static_cast<std::size_t>(best)].load && o < best)))) {
          best = o;
          best_peak = peak;
        }
      }
      if (best < 0) break;
      const double load = s.objects[static_cast<std::size_t>(best)].load;
      tload[static_cast<std::size_t>(heavy)] -= load;
      tload[static_cast<std::size_t>(light)] += load;
      thread_of[static_cast<std::size_t>(best)] = light;
    }
  }

  for (const auto& o : s.objects) {
    if (thread_of[static_cast<std::size_t>(o.id)] != o.home_thread) {
      moves.push_back({o.id, thread_of[static_cast<std::size_t>(o.id)]});
    }
  }
  return moves;
}

// ---------------------------------------------------------------------------
// Plan application

void check_plan(const WorkloadSnapshot& s, const MigrationPlan& m) {
  std::vector<char> seen(s.objects.size(), 0);
  for (const auto& mv : m.moves) {
    if (mv.object < 0 || static_cast<std::size_t>(mv.object) >= s.objects.size()) {
      throw StalePlanError(fmt::format("plan moves unknown object {}", mv.object));
    }
    const auto& o = s.objects[static_cast<std::size_t>(mv.object)];
    if (o.home_node != mv.from_node) {
      throw StalePlanError(fmt::format("object {} is on node {}, plan expects node {}", mv.object, o.home_node,
                                       mv.from_node));
    }
    if (mv.to_node == mv.from_node || mv.to_node < 0 || mv.to_node >= s.node_count) {
      throw StalePlanError(fmt::format("object {} has invalid destination {}", mv.object, mv.to_node));
    }
    if (seen[static_cast<std::size_t>(mv.object)]++) {
      throw StalePlanError(fmt::format("object {} moves more than once", mv.object));
    }
  }
  for (const auto& tm : m.thread_moves) {
    if (tm.object < 0 || static_cast<std::size_t>(tm.object) >= s.objects.size()) {
      throw StalePlanError(fmt::format("thread move for unknown object {}", tm.object));
    }
    if (tm.to_thread < 0 || tm.to_thread >= s.threads_per_node) {
      throw StalePlanError(fmt::format("object {} has invalid thread {}", tm.object, tm.to_thread));
    }
  }
}

bool is_single_hop(const MigrationPlan& m, const NeighborGraph& g) {
  return std::all_of(m.moves.begin(), m.moves.end(),
                     [&](const Move& mv) { return g.adjacent(mv.from_node, mv.to_node); });
}

WorkloadSnapshot apply_plan(const WorkloadSnapshot& s, const MigrationPlan& m) {
  check_plan(s, m);
  WorkloadSnapshot out = s;
  for (const auto& mv : m.moves) out.objects[static_cast<std::size_t>(mv.object)].home_node = mv.to_node;
  for (const auto& tm : m.thread_moves) out.objects[static_cast<std::size_t>(tm.object)].home_thread = tm.to_thread;
  return out;
}

}  // namespace simlb
