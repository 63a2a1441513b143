#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "simlb/core_model.hpp"
#include "simlb/generators.hpp"
#include "simlb/strategy.hpp"

namespace simlb {

struct Metrics {
  double max_avg_load = 1.0;
  bool zero_load = false;  // total load was zero; max_avg_load forced to 1
  double ext_bytes = 0.0;
  double int_bytes = 0.0;
  double ext_int_ratio = 0.0;  // +inf when ext_bytes > 0 and int_bytes == 0
  double migration_fraction = 0.0;
  std::size_t migrated_objects = 0;

  bool operator==(const Metrics&) const = default;
};

/// Load balance, communication split and (against `previous`) the fraction
/// of objects whose node changed. Throws std::invalid_argument when the two
/// snapshots do not describe the same objects.
Metrics compute_metrics(const WorkloadSnapshot& s, const WorkloadSnapshot* previous = nullptr);

/// max / mean of a vector; 1 when the mean is zero.
double max_avg_ratio(std::span<const double> values);

struct RoundRecord {
  int round = 0;            // 0 is the state before any balancing
  std::int64_t step = 0;    // application step at which the round ran
  Metrics metrics;
  double strategy_wall_time = 0.0;
  std::optional<double> particle_max_avg;  // PIC only
  StrategyDiagnostics diagnostics;
};

struct StepRecord {
  std::int64_t step = 0;
  double max_avg_load = 1.0;
  double particle_max_avg = 1.0;
  std::vector<std::int64_t> node_particles;
};

struct MetricsReport {
  StrategyKind strategy = StrategyKind::None;
  Metrics final_metrics;
  double total_strategy_wall_time = 0.0;
  std::vector<RoundRecord> rounds;
  std::vector<StepRecord> steps;  // PIC only, one entry per application step
  /// PIC only: mean particle max/avg over steps from the first balancing step
  /// onward (every step when balancing never runs).
  std::optional<double> mean_particle_max_avg;
};

struct SimulationInput {
  std::variant<WorkloadSnapshot, PicSpec> workload;
};

struct SimulationOptions {
  StrategyConfig strategy;
  std::int64_t lb_every = 10;
  std::int64_t steps = 10;
  /// Keeps the snapshot after every balancing round (round 0 included).
  bool keep_round_snapshots = false;
};

struct SimulationResult {
  MetricsReport report;
  WorkloadSnapshot final_snapshot;
  std::vector<WorkloadSnapshot> round_snapshots;
  std::vector<MigrationPlan> plans;
};

/// Steps the application, balancing every `lb_every` steps. PIC workloads
/// advance their particles each step and rebuild chare loads and edges while
/// keeping the current placement.
SimulationResult run_simulation(const SimulationInput& input, const SimulationOptions& options);

/// Per-node particle counts for a chare placement.
std::vector<std::int64_t> node_particle_counts(const PicState& state, std::span<const NodeId> placement);

}  // namespace simlb
