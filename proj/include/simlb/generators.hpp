#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "simlb/core_model.hpp"

namespace simlb {

class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Synthetic load imbalance

struct NoImbalance {
  bool operator==(const NoImbalance&) const = default;
};

enum class RandomScope { Object, Node };

/// Multiplies loads by (1 + fraction) or (1 - fraction) with equal
/// probability. Scope Object draws once per object; scope Node draws once per
/// node and applies it to every object initially placed there.
struct RandomPct {
  double fraction = 0.4;
  std::uint64_t seed = 1;
  RandomScope scope = RandomScope::Object;
  bool operator==(const RandomPct&) const = default;
};

/// PE numbers count from 1: PEs numbered 1 and 2 (mod 7) are overloaded, PE 3
/// (mod 7) is underloaded. The default multipliers reproduce an initial
/// max/avg of 1.32 on 8 nodes and 1.37 on 32 nodes.
struct Mod7 {
  double overload = 1.542;
  double underload = 0.72;
  bool operator==(const Mod7&) const = default;
};

struct Spike {
  double factor = 10.0;
  NodeId node = 0;
  bool operator==(const Spike&) const = default;
};

using ImbalanceSpec = std::variant<NoImbalance, RandomPct, Mod7, Spike>;

/// Load multiplier for a node under the Mod7 pattern.
double mod7_multiplier(const Mod7& m, NodeId node);

// ---------------------------------------------------------------------------
// Stencil workloads

/// Rectangular tiles, one per node. Nodes are numbered with the first
/// dimension fastest.
struct TiledDecomposition {
  std::vector<int> node_dims;
  bool operator==(const TiledDecomposition&) const = default;
};

/// Contiguous stripes along the first grid dimension; node i owns stripe i, so
/// the nodes form a 1D ring when the grid is periodic.
struct StripedRing {
  int node_count = 1;
  bool operator==(const StripedRing&) const = default;
};

using Decomposition = std::variant<TiledDecomposition, StripedRing>;

struct StencilSpec {
  std::vector<int> grid_dims;  // 2 or 3 entries, objects per dimension
  Decomposition decomposition = TiledDecomposition{};
  bool periodic = true;
  double base_load = 1.0;
  double bytes_per_edge = 1.0;
  ImbalanceSpec imbalance = NoImbalance{};
  int threads_per_node = 1;
};

/// One object per grid point with 5-point (2D) or 7-point (3D) edges.
/// Throws SpecError when the decomposition does not divide the grid.
WorkloadSnapshot gen_stencil(const StencilSpec& spec);

/// Analytic edge count for a stencil grid.
std::size_t stencil_edge_count(std::span<const int> grid_dims, bool periodic);

// ---------------------------------------------------------------------------
// PIC-style particle workload

enum class ChareMapping { Striped, Quad };

struct PicSpec {
  int grid_cells = 1000;
  std::int64_t particles = 100000;
  double rho = 0.9;
  int k = 2;
  int chare_cols = 12;
  int chare_rows = 12;
  ChareMapping mapping = ChareMapping::Striped;
  int node_count = 4;
  std::uint64_t seed = 1;
  double bytes_per_particle_crossing = 1.0;
  double bytes_halo_const = 1.0;
  double load_per_particle = 1.0;
  double load_per_cell = 0.0;

  bool operator==(const PicSpec&) const = default;
};

void validate(const PicSpec& spec);

struct Particle {
  std::int32_t col = 0;
  std::int32_t row = 0;
  bool operator==(const Particle&) const = default;
};

struct PicState {
  PicSpec spec;
  std::vector<Particle> particles;
  std::int64_t step = 0;
};

/// First cell of chare column/row `i` when `cells` are split into `parts`
/// nearly equal pieces; boundaries sit at floor(i * cells / parts).
int chare_boundary(int i, int cells, int parts);

/// Chare index (row-major, column fastest) containing cell (col, row).
ObjectId chare_of_cell(const PicSpec& spec, int col, int row);

/// Initial chare-to-node placement for the configured mapping.
std::vector<NodeId> pic_initial_placement(const PicSpec& spec);

PicState gen_pic_state(const PicSpec& spec);

/// Advances every particle by 2k+1 columns and one row, both periodic.
PicState pic_step(const PicState& state);
void pic_step_inplace(PicState& state);

std::vector<std::int64_t> chare_particle_counts(const PicState& state);

/// One object per chare. `placement` defaults to the initial mapping.
WorkloadSnapshot pic_to_snapshot(const PicState& state,
                                 std::optional<std::span<const NodeId>> placement = std::nullopt);

struct PicInitial {
  PicState state;
  WorkloadSnapshot snapshot;
};
PicInitial gen_pic_initial(const PicSpec& spec);

/// Expected particle count in column i under the geometric distribution.
double geometric_expected_count(const PicSpec& spec, int column);

}  // namespace simlb
