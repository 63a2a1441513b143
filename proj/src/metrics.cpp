#include "simlb/metrics.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace simlb {

double max_avg_ratio(std::span<const double> values) {
  if (values.empty()) return 1.0;
  double sum = 0.0;
  double mx = values.front();
  for (double v : values) {
    sum += v;
    mx = std::max(mx, v);
  }
  const double mean = sum / static_cast<double>(values.size());
  return mean > 0.0 ? mx / mean : 1.0;
}

Metrics compute_metrics(const WorkloadSnapshot& s, const WorkloadSnapshot* previous) {
  Metrics m;
  const auto loads = node_loads(s);
  double total = 0.0;
  for (double l : loads) total += l;
  m.zero_load = !(total > 0.0);
  m.max_avg_load = max_avg_ratio(loads);

  for (const auto& e : s.edges) {
    const auto na = s.objects[static_cast<std::size_t>(e.a)].home_node;
    const auto nb = s.objects[static_cast<std::size_t>(e.b)].home_node;
    (na == nb ? m.int_bytes : m.ext_bytes) += e.bytes;
  }
  if (m.int_bytes > 0.0) {
    m.ext_int_ratio = m.ext_bytes / m.int_bytes;
  } else {
    m.ext_int_ratio = m.ext_bytes > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }

  if (previous) {
    if (previous->objects.size() != s.objects.size()) {
      throw std::invalid_argument(fmt::format("snapshots differ in object count ({} vs {})",
                                              previous->objects.size(), s.objects.size()));
    }
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      if (previous->objects[i].id != s.objects[i].id) throw std::invalid_argument("snapshots differ in object ids");
      if (previous->objects[i].home_node != s.objects[i].home_node) ++m.migrated_objects;
    }
    m.migration_fraction =
        s.objects.empty() ? 0.0 : static_cast<double>(m.migrated_objects) / static_cast<double>(s.objects.size());
  }
  return m;
}

std::vector<std::int64_t> node_particle_counts(const PicState& state, std::span<const NodeId> placement) {
  const auto chares = chare_particle_counts(state);
  if (placement.size() != chares.size()) throw std::invalid_argument("placement size does not match chare count");
  std::vector<std::int64_t> out(static_cast<std::size_t>(state.spec.node_count), 0);
  for (std::size_t c = 0; c < chares.size(); ++c) out[static_cast<std::size_t>(placement[c])] += chares[c];
  return out;
}

namespace {

double particle_ratio(const std::vector<std::int64_t>& counts) {
  std::vector<double> v(counts.begin(), counts.end());
  return max_avg_ratio(v);
}

RoundRecord balance_round(WorkloadSnapshot& snap, const StrategyConfig& cfg, int round, std::int64_t step,
                          SimulationResult& out) {
  StrategyOutcome outcome;
  try {
    outcome = run_strategy(snap, cfg);
  } catch (const std::exception& e) {
    throw std::runtime_error(fmt::format("strategy {} failed in round {}: {}", to_string(cfg.kind), round, e.what()));
  }
  WorkloadSnapshot next = apply_plan(snap, outcome.plan);
  RoundRecord rec;
  rec.round = round;
  rec.step = step;
  rec.metrics = compute_metrics(next, &snap);
  rec.strategy_wall_time = outcome.wall_seconds;
  rec.diagnostics = std::move(outcome.diagnostics);
  out.plans.push_back(std::move(outcome.plan));
  snap = std::move(next);
  return rec;
}

}  // namespace

SimulationResult run_simulation(const SimulationInput& input, const SimulationOptions& options) {
  if (options.lb_every < 1) throw std::invalid_argument("lb_every must be positive");
  if (options.steps < 1) throw std::invalid_argument("steps must be positive");

  SimulationResult out;
  auto& report = out.report;
  report.strategy = options.strategy.kind;
  int round = 0;

  if (const auto* snap0 = std::get_if<WorkloadSnapshot>(&input.workload)) {
    validate(*snap0);
    WorkloadSnapshot snap = *snap0;
    RoundRecord initial;
    initial.metrics = compute_metrics(snap);
    report.rounds.push_back(std::move(initial));
    if (options.keep_round_snapshots) out.round_snapshots.push_back(snap);
    for (std::int64_t step = 1; step <= options.steps; ++step) {
      if (step % options.lb_every != 0) continue;
      auto rec = balance_round(snap, options.strategy, ++round, step, out);
      report.total_strategy_wall_time += rec.strategy_wall_time;
      report.rounds.push_back(std::move(rec));
      if (options.keep_round_snapshots) out.round_snapshots.push_back(snap);
    }
    report.final_metrics = compute_metrics(snap, snap0);
    out.final_snapshot = std::move(snap);
    return out;
  }

  const auto& spec = std::get<PicSpec>(input.workload);
  PicState state = gen_pic_state(spec);
  std::vector<NodeId> placement = pic_initial_placement(spec);
  WorkloadSnapshot snap = pic_to_snapshot(state, placement);
  const WorkloadSnapshot initial_snap = snap;

  RoundRecord initial;
  initial.metrics = compute_metrics(snap);
  initial.particle_max_avg = particle_ratio(node_particle_counts(state, placement));
  report.rounds.push_back(std::move(initial));
  if (options.keep_round_snapshots) out.round_snapshots.push_back(snap);

  double ratio_sum = 0.0;
  std::int64_t ratio_count = 0;
  for (std::int64_t step = 1; step <= options.steps; ++step) {
    pic_step_inplace(state);
    snap = pic_to_snapshot(state, placement);
    if (step % options.lb_every == 0) {
      auto rec = balance_round(snap, options.strategy, ++round, step, out);
      for (const auto& o : snap.objects) placement[static_cast<std::size_t>(o.id)] = o.home_node;
      rec.particle_max_avg = particle_ratio(node_particle_counts(state, placement));
      report.total_strategy_wall_time += rec.strategy_wall_time;
      report.rounds.push_back(std::move(rec));
      if (options.keep_round_snapshots) out.round_snapshots.push_back(snap);
    }
    StepRecord sr;
    sr.step = step;
    sr.node_particles = node_particle_counts(state, placement);
    sr.particle_max_avg = particle_ratio(sr.node_particles);
    sr.max_avg_load = max_avg_ratio(node_loads(snap));
    if (step >= options.lb_every || options.lb_every > options.steps) {
      ratio_sum += sr.particle_max_avg;
      ++ratio_count;
    }
    report.steps.push_back(std::move(sr));
  }
  report.mean_particle_max_avg = ratio_count > 0 ? ratio_sum / static_cast<double>(ratio_count) : 1.0;
  report.final_metrics = compute_metrics(snap, &initial_snap);
  out.final_snapshot = std::move(snap);
  return out;
}

}  // namespace simlb
