// Prints one PASS/FAIL line per acceptance criterion; exits nonzero if any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "simlb/core_model.hpp"
#include "simlb/diffusion.hpp"
#include "simlb/migration.hpp"
#include "../support/oracles.hpp"
#include "../support/scenarios.hpp"

using namespace simlb;
using namespace simlb::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, std::string what) {
    if (!ok) pass = false;
    notes.push_back((ok ? "" : "!") + std::move(what));
  }
};

Metrics pass_once(const WorkloadSnapshot& s, StrategyKind kind, int k) {
  return one_round(s, strategy(kind, k)).report.final_metrics;
}

Outcome criterion1() {
  Outcome out;
  const auto s = gen_stencil(ring_spike_spec());
  std::vector<Metrics> ms;
  for (int k : {1, 2, 4, 8}) {
    auto cfg = strategy(StrategyKind::DiffComm, k);
    cfg.allow_noncomm_neighbors = true;
    ms.push_back(one_round(s, cfg).report.final_metrics);
    out.notes.push_back(fmt::format("K={} max/avg={:.3f} ext/int={:.3f}", k, ms.back().max_avg_load,
                                    ms.back().ext_int_ratio));
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < ms.size(); ++i) decreasing &= ms[i].max_avg_load < ms[i - 1].max_avg_load;
  out.check(decreasing, "max/avg strictly decreasing in K");
  out.check(ms[0].max_avg_load >= 3.0, "max/avg(K=1) >= 3.0");
  out.check(ms[3].max_avg_load <= 1.3, "max/avg(K=8) <= 1.3");
  out.check(ms[3].ext_int_ratio >= ms[0].ext_int_ratio, "ext/int(K=8) >= ext/int(K=1)");
  return out;
}

Outcome criterion2() {
  Outcome out;
  const auto s = gen_stencil(tiled_random_spec());
  const auto init = compute_metrics(s);
  const auto comm = pass_once(s, StrategyKind::DiffComm, 4);
  const auto coord = pass_once(s, StrategyKind::DiffCoord, 4);
  out.notes.push_back(fmt::format("initial {:.3f}/{:.3f} comm {:.3f}/{:.3f} coord {:.3f}/{:.3f}", init.max_avg_load,
                                  init.ext_int_ratio, comm.max_avg_load, comm.ext_int_ratio, coord.max_avg_load,
                                  coord.ext_int_ratio));
  out.check(init.max_avg_load >= 1.4 && init.max_avg_load <= 2.1, "initial max/avg in [1.4, 2.1]");
  out.check(comm.max_avg_load <= 1.15, "diff-comm max/avg <= 1.15");
  out.check(coord.max_avg_load <= 1.20, "diff-coord max/avg <= 1.20");
  out.check(comm.ext_int_ratio <= coord.ext_int_ratio, "diff-comm ext/int <= diff-coord ext/int");
  return out;
}

Outcome criterion3() {
  Outcome out;
  const auto s = gen_stencil(mod7_3d_spec());
  const auto init = compute_metrics(s);
  const auto greedy = pass_once(s, StrategyKind::GreedyRefine, 4);
  const auto comm = pass_once(s, StrategyKind::DiffComm, 4);
  const auto coord = pass_once(s, StrategyKind::DiffCoord, 4);
  out.notes.push_back(fmt::format("initial {:.3f}/{:.3f} greedy {:.3f}/{:.3f} comm {:.3f}/{:.3f} mig {:.3f} "
                                  "coord {:.3f}/{:.3f}",
                                  init.max_avg_load, init.ext_int_ratio, greedy.max_avg_load, greedy.ext_int_ratio,
                                  comm.max_avg_load, comm.ext_int_ratio, comm.migration_fraction, coord.max_avg_load,
                                  coord.ext_int_ratio));
  out.check(std::abs(init.max_avg_load - 1.37) <= 0.05, "initial max/avg = 1.37 +- 0.05");
  out.check(greedy.max_avg_load <= 1.02, "greedy-refine max/avg <= 1.02");
  out.check(comm.max_avg_load <= 1.10, "diff-comm max/avg <= 1.10");
  out.check(comm.migration_fraction <= 0.25, "diff-comm migration_fraction <= 0.25");
  out.check(comm.ext_int_ratio < greedy.ext_int_ratio, "diff-comm ext/int < greedy-refine ext/int");
  out.check(coord.ext_int_ratio >= comm.ext_int_ratio, "diff-coord ext/int >= diff-comm ext/int");
  return out;
}

double pic_mean(StrategyKind kind) {
  SimulationOptions opt;
  opt.strategy = strategy(kind, 4);
  opt.lb_every = 10;
  opt.steps = 200;
  return *run_simulation({pic_spec()}, opt).report.mean_particle_max_avg;
}

Outcome criterion4() {
  Outcome out;
  const double none = pic_mean(StrategyKind::None);
  const double comm = pic_mean(StrategyKind::DiffComm);
  const double coord = pic_mean(StrategyKind::DiffCoord);
  const double imp_comm = 1.0 - comm / none;
  const double imp_coord = 1.0 - coord / none;
  out.notes.push_back(fmt::format("no-lb {:.3f} comm {:.3f} ({:.1f}%) coord {:.3f} ({:.1f}%)", none, comm,
                                  100 * imp_comm, coord, 100 * imp_coord));
  out.check(imp_comm >= 0.40, "diff-comm >= 40% below no-LB");
  out.check(imp_coord >= 0.40, "diff-coord >= 40% below no-LB");
  return out;
}

// Series of node n shifted by n * period / nodes steps equals series of node 0.
Outcome criterion5() {
  Outcome out;
  const auto spec = pic_spec();
  SimulationOptions opt;
  opt.strategy = strategy(StrategyKind::None);
  opt.lb_every = 10;
  opt.steps = 400;
  const auto r = run_simulation({spec}, opt);
  const auto& steps = r.report.steps;
  const int stride = 2 * spec.k + 1;
  const int nodes = spec.node_count;
  const int shift = spec.grid_cells / nodes / stride;  // steps to cross one node stripe
  const int period = spec.grid_cells / stride;
  out.notes.push_back(fmt::format("shift {} steps, period {} steps", shift, period));
  bool exact = true;
  for (int n = 1; n < nodes; ++n) {
    for (std::size_t t = 0; t + static_cast<std::size_t>(n * shift) < steps.size(); ++t) {
      // node n sees at step t + n*shift what node 0 saw at step t
      if (steps[t + static_cast<std::size_t>(n * shift)].node_particles[static_cast<std::size_t>(n)] !=
          steps[t].node_particles[0]) {
        exact = false;
      }
    }
  }
  bool periodic = true;
  for (std::size_t t = 0; t + static_cast<std::size_t>(period) < steps.size(); ++t) {
    periodic &= steps[t].node_particles == steps[t + static_cast<std::size_t>(period)].node_particles;
  }
  out.check(exact, "per-node series are exact circular shifts");
  out.check(periodic, "series repeat with the full period");
  return out;
}

#include "property_suite.inc"

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "ring spike neighbor-count trend", 5.0, criterion1},
      {2, "tiled stencil bands", 5.0, criterion2},
      {3, "mod-7 3D strategy ordering", 30.0, criterion3},
      {4, "PIC improvement", 60.0, criterion4},
      {5, "traveling-wave shift", 60.0, criterion5},
      {6, "property suite", 120.0, criterion6},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.check(false, fmt::format("exception: {}", e.what()));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.check(secs < c.limit_seconds, fmt::format("runtime {:.2f}s < {:.0f}s", secs, c.limit_seconds));
    std::string detail;
    for (const auto& n : o.notes) detail += (detail.empty() ? "" : "; ") + n;
    fmt::print("criterion {} [{}]: {} ({})\n", c.id, c.name, o.pass ? "PASS" : "FAIL", detail);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
