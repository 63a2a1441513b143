#pragma once

#include "simlb/core_model.hpp"

namespace simlb {

/// Refinement baseline that ignores communication. While the heaviest node
/// exceeds mean * (1 + tol), move its largest object that keeps the source at
/// or above the mean and the lightest node at or below mean * (1 + tol).
MigrationPlan greedy_refine(const WorkloadSnapshot& s, double tol = 0.01);

inline MigrationPlan no_lb(const WorkloadSnapshot&) { return {}; }

}  // namespace simlb
