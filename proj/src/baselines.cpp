#include "simlb/baselines.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <stdexcept>

namespace simlb {

MigrationPlan greedy_refine(const WorkloadSnapshot& s, double tol) {
  if (!(tol >= 0.0)) throw std::invalid_argument("greedy_refine tolerance must be nonnegative");
  MigrationPlan plan;
  const auto n = static_cast<std::size_t>(s.node_count);
  if (n < 2 || s.objects.empty()) return plan;

  // Keyed by (load, -id) so the predecessor of an upper bound is the largest
  // fitting object, lowest id among equals.
  using Key = std::pair<double, ObjectId>;
  std::vector<std::set<Key>> resident(n);
  std::vector<double> load(n, 0.0);
  for (const auto& o : s.objects) {
    resident[static_cast<std::size_t>(o.home_node)].insert({o.load, -o.id});
    load[static_cast<std::size_t>(o.home_node)] += o.load;
  }
  double total = 0.0;
  for (double l : load) total += l;
  const double mean = total / static_cast<double>(n);
  const double ceiling = mean * (1.0 + tol);

  std::vector<NodeId> current(s.objects.size());
  for (const auto& o : s.objects) current[static_cast<std::size_t>(o.id)] = o.home_node;

  for (std::size_t guard = 0; guard <= s.objects.size() * 2; ++guard) {
    const auto heavy = static_cast<std::size_t>(std::max_element(load.begin(), load.end()) - load.begin());
    const auto light = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
    if (load[heavy] <= ceiling || heavy == light) break;

    const double cap = std::min(load[heavy] - mean, ceiling - load[light]);
    if (!(cap > 0.0)) break;
    auto& pool = resident[heavy];
    auto it = pool.upper_bound({cap, std::numeric_limits<ObjectId>::max()});
    if (it == pool.begin()) break;
    --it;
    if (!(it->first > 0.0)) break;
    const Key picked = *it;
    pool.erase(it);
    resident[light].insert(picked);
    load[heavy] -= picked.first;
    load[light] += picked.first;
    current[static_cast<std::size_t>(-picked.second)] = static_cast<NodeId>(light);
  }

  for (const auto& o : s.objects) {
    const NodeId to = current[static_cast<std::size_t>(o.id)];
    if (to != o.home_node) plan.moves.push_back({o.id, o.home_node, to});
  }
  return plan;
}

}  // namespace simlb
