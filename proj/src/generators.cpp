#include "simlb/generators.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "simlb/rng.hpp"

namespace simlb {

namespace {

std::size_t product(std::span<const int> v) {
  std::size_t p = 1;
  for (int x : v) p *= static_cast<std::size_t>(x);
  return p;
}

struct StencilLayout {
  std::vector<int> grid;
  std::vector<int> tile;       // objects per node along each dimension
  std::vector<int> node_grid;  // nodes along each dimension
  int node_count = 1;
};

StencilLayout layout_for(const StencilSpec& spec) {
  const auto dims = spec.grid_dims.size();
  if (dims != 2 && dims != 3) throw SpecError("stencil grid must have 2 or 3 dimensions");
  for (int g : spec.grid_dims) {
    if (g < 1) throw SpecError("stencil grid dimensions must be positive");
  }
  if (!(spec.base_load > 0.0)) throw SpecError("base_load must be positive");
  if (!(spec.bytes_per_edge > 0.0)) throw SpecError("bytes_per_edge must be positive");
  if (spec.threads_per_node < 1) throw SpecError("threads_per_node must be positive");

  StencilLayout lay;
  lay.grid = spec.grid_dims;
  if (const auto* tiled = std::get_if<TiledDecomposition>(&spec.decomposition)) {
    if (tiled->node_dims.size() != dims) throw SpecError("node_dims rank must match grid rank");
    for (std::size_t d = 0; d < dims; ++d) {
      const int n = tiled->node_dims[d];
      if (n < 1 || spec.grid_dims[d] % n != 0) {
        throw SpecError(fmt::format("node dimension {} ({}) does not divide grid dimension {}", d, n,
                                    spec.grid_dims[d]));
      }
      lay.tile.push_back(spec.grid_dims[d] / n);
    }
    lay.node_grid = tiled->node_dims;
  } else {
    const auto& ring = std::get<StripedRing>(spec.decomposition);
    if (ring.node_count < 1 || spec.grid_dims[0] % ring.node_count != 0) {
      throw SpecError(fmt::format("{} stripes do not divide grid width {}", ring.node_count, spec.grid_dims[0]));
    }
    lay.node_grid.assign(dims, 1);
    lay.node_grid[0] = ring.node_count;
    lay.tile = spec.grid_dims;
    lay.tile[0] = spec.grid_dims[0] / ring.node_count;
  }
  lay.node_count = static_cast<int>(product(lay.node_grid));
  return lay;
}

std::vector<double> imbalance_multipliers(const ImbalanceSpec& imb, const WorkloadSnapshot& s) {
  std::vector<double> mult(s.objects.size(), 1.0);
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, RandomPct>) {
          if (!(v.fraction >= 0.0 && v.fraction < 1.0)) throw SpecError("random imbalance fraction must be in [0, 1)");
          Rng rng(v.seed);
          if (v.scope == RandomScope::Object) {
            for (auto& m : mult) m = rng.coin() ? 1.0 + v.fraction : 1.0 - v.fraction;
          } else {
            std::vector<double> per_node(static_cast<std::size_t>(s.node_count));
            for (auto& m : per_node) m = rng.coin() ? 1.0 + v.fraction : 1.0 - v.fraction;
            for (std::size_t i = 0; i < mult.size(); ++i) {
              mult[i] = per_node[static_cast<std::size_t>(s.objects[i].home_node)];
            }
          }
        } else if constexpr (std::is_same_v<T, Mod7>) {
          if (!(v.overload > 0.0 && v.underload > 0.0)) throw SpecError("mod7 multipliers must be positive");
          for (std::size_t i = 0; i < mult.size(); ++i) mult[i] = mod7_multiplier(v, s.objects[i].home_node);
        } else if constexpr (std::is_same_v<T, Spike>) {
          if (!(v.factor > 0.0)) throw SpecError("spike factor must be positive");
          if (v.node < 0 || v.node >= s.node_count) throw SpecError("spike node out of range");
          for (std::size_t i = 0; i < mult.size(); ++i) {
            if (s.objects[i].home_node == v.node) mult[i] = v.factor;
          }
        }
      },
      imb);
  return mult;
}

}  // namespace

double mod7_multiplier(const Mod7& m, NodeId node) {
  const int pe = (node + 1) % 7;
  if (pe == 1 || pe == 2) return m.overload;
  if (pe == 3) return m.underload;
  return 1.0;
}

std::size_t stencil_edge_count(std::span<const int> grid_dims, bool periodic) {
  const std::size_t n = product(grid_dims);
  std::size_t edges = 0;
  for (int g : grid_dims) {
    const auto gs = static_cast<std::size_t>(g);
    if (periodic && g >= 3) {
      edges += n;
    } else {
      edges += (gs - 1) * (n / gs);
    }
  }
  return edges;
}

WorkloadSnapshot gen_stencil(const StencilSpec& spec) {
  const StencilLayout lay = layout_for(spec);
  const auto dims = lay.grid.size();
  const std::size_t n = product(lay.grid);

  WorkloadSnapshot s;
  s.node_count = lay.node_count;
  s.threads_per_node = spec.threads_per_node;
  s.coord_dims = static_cast<int>(dims);
  s.periodic_dims.assign(dims, spec.periodic);
  s.objects.resize(n);

  std::vector<int> per_node_count(static_cast<std::size_t>(lay.node_count), 0);
  std::vector<int> c(dims);
  for (std::size_t id = 0; id < n; ++id) {
    std::size_t rest = id;
    for (std::size_t d = 0; d < dims; ++d) {
      c[d] = static_cast<int>(rest % static_cast<std::size_t>(lay.grid[d]));
      rest /= static_cast<std::size_t>(lay.grid[d]);
    }
    int node = 0;
    for (std::size_t d = dims; d-- > 0;) node = node * lay.node_grid[d] + c[d] / lay.tile[d];

    auto& o = s.objects[id];
    o.id = static_cast<ObjectId>(id);
    o.home_node = node;
    o.home_thread = per_node_count[static_cast<std::size_t>(node)]++ % spec.threads_per_node;
    o.load = spec.base_load;
    o.coords.assign(c.begin(), c.end());
  }

  std::size_t stride = 1;
  for (std::size_t d = 0; d < dims; ++d) {
    const int g = lay.grid[d];
    for (std::size_t id = 0; id < n; ++id) {
      const int x = static_cast<int>((id / stride) % static_cast<std::size_t>(g));
      if (x + 1 < g) {
        s.edges.push_back({static_cast<ObjectId>(id), static_cast<ObjectId>(id + stride), spec.bytes_per_edge});
      } else if (spec.periodic && g >= 3) {
        const auto wrap = id - static_cast<std::size_t>(g - 1) * stride;
        s.edges.push_back({static_cast<ObjectId>(wrap), static_cast<ObjectId>(id), spec.bytes_per_edge});
      }
    }
    stride *= static_cast<std::size_t>(g);
  }

  const auto mult = imbalance_multipliers(spec.imbalance, s);
  for (std::size_t i = 0; i < n; ++i) s.objects[i].load *= mult[i];

  canonicalize(s);
  return s;
}

// ---------------------------------------------------------------------------

void validate(const PicSpec& spec) {
  if (spec.grid_cells < 1) throw SpecError("grid_cells must be positive");
  if (spec.particles < 0) throw SpecError("particle count must be nonnegative");
  if (!(spec.rho > 0.0 && spec.rho <= 1.0)) throw SpecError("rho must be in (0, 1]");
  if (spec.k < 0) throw SpecError("k must be nonnegative");
  if (spec.chare_cols < 1 || spec.chare_rows < 1) throw SpecError("chare dimensions must be positive");
  if (spec.chare_cols > spec.grid_cells || spec.chare_rows > spec.grid_cells) {
    throw SpecError("more chares than grid cells along a dimension");
  }
  if (spec.node_count < 1 || spec.node_count > spec.chare_cols * spec.chare_rows) {
    throw SpecError("node_count must be in [1, number of chares]");
  }
  if (!(spec.bytes_per_particle_crossing > 0.0)) throw SpecError("bytes_per_particle_crossing must be positive");
  if (!(spec.bytes_halo_const >= 0.0)) throw SpecError("bytes_halo_const must be nonnegative");
  if (!(spec.load_per_particle > 0.0)) throw SpecError("load_per_particle must be positive");
  if (!(spec.load_per_cell >= 0.0)) throw SpecError("load_per_cell must be nonnegative");
}

int chare_boundary(int i, int cells, int parts) {
  return static_cast<int>(static_cast<std::int64_t>(i) * cells / parts);
}

namespace {

int chare_index_1d(int cell, int cells, int parts) {
  return static_cast<int>(((static_cast<std::int64_t>(cell) + 1) * parts - 1) / cells);
}

std::vector<int> chare_lookup(int cells, int parts) {
  std::vector<int> out(static_cast<std::size_t>(cells));
  for (int c = 0; c < cells; ++c) out[static_cast<std::size_t>(c)] = chare_index_1d(c, cells, parts);
  return out;
}

}  // namespace

ObjectId chare_of_cell(const PicSpec& spec, int col, int row) {
  const int cx = chare_index_1d(col, spec.grid_cells, spec.chare_cols);
  const int cy = chare_index_1d(row, spec.grid_cells, spec.chare_rows);
  return static_cast<ObjectId>(cy) * spec.chare_cols + cx;
}

std::vector<NodeId> pic_initial_placement(const PicSpec& spec) {
  validate(spec);
  const int cols = spec.chare_cols;
  const int rows = spec.chare_rows;
  const auto total = static_cast<std::int64_t>(cols) * rows;
  std::vector<NodeId> placement(static_cast<std::size_t>(total));
  if (spec.mapping == ChareMapping::Striped) {
    for (int cy = 0; cy < rows; ++cy) {
      for (int cx = 0; cx < cols; ++cx) {
        const std::int64_t column_major = static_cast<std::int64_t>(cx) * rows + cy;
        placement[static_cast<std::size_t>(cy * cols + cx)] =
            static_cast<NodeId>(column_major * spec.node_count / total);
      }
    }
  } else {
    int py = 1;
    for (int d = 1; d * d <= spec.node_count; ++d) {
      if (spec.node_count % d == 0) py = d;
    }
    int px = spec.node_count / py;
    if (px > cols || py > rows) std::swap(px, py);
    if (px > cols || py > rows) throw SpecError("quad mapping needs at least as many chares as node tiles per dimension");
    for (int cy = 0; cy < rows; ++cy) {
      for (int cx = 0; cx < cols; ++cx) {
        const int tx = cx * px / cols;
        const int ty = cy * py / rows;
        placement[static_cast<std::size_t>(cy * cols + cx)] = tx + px * ty;
      }
    }
  }
  return placement;
}

double geometric_expected_count(const PicSpec& spec, int column) {
  const double n = static_cast<double>(spec.particles);
  if (spec.rho == 1.0) return n / spec.grid_cells;
  const double a = n * (1.0 - spec.rho) / (1.0 - std::pow(spec.rho, spec.grid_cells));
  return a * std::pow(spec.rho, column);
}

PicState gen_pic_state(const PicSpec& spec) {
  validate(spec);
  PicState st;
  st.spec = spec;
  st.particles.reserve(static_cast<std::size_t>(spec.particles));
  Rng rng(spec.seed);
  const int c = spec.grid_cells;
  const double log_rho = std::log(spec.rho);
  const double tail = 1.0 - std::pow(spec.rho, c);
  for (std::int64_t p = 0; p < spec.particles; ++p) {
    int col = 0;
    if (spec.rho == 1.0) {
      col = static_cast<int>(rng.below(static_cast<std::uint64_t>(c)));
    } else {
      // Inverse CDF of P(col = i) proportional to rho^i on 0..c-1.
      const double u = rng.uniform01();
      const double x = std::floor(std::log1p(-u * tail) / log_rho);
      col = static_cast<int>(std::clamp(x, 0.0, static_cast<double>(c - 1)));
    }
    const int row = static_cast<int>(rng.below(static_cast<std::uint64_t>(c)));
    st.particles.push_back({col, row});
  }
  return st;
}

void pic_step_inplace(PicState& state) {
  const int c = state.spec.grid_cells;
  const int dx = (2 * state.spec.k + 1) % c;
  const int dy = 1 % c;
  for (auto& p : state.particles) {
    p.col += dx;
    if (p.col >= c) p.col -= c;
    p.row += dy;
    if (p.row >= c) p.row -= c;
  }
  ++state.step;
}

PicState pic_step(const PicState& state) {
  PicState next = state;
  pic_step_inplace(next);
  return next;
}

std::vector<std::int64_t> chare_particle_counts(const PicState& state) {
  const auto& spec = state.spec;
  const auto cx_of = chare_lookup(spec.grid_cells, spec.chare_cols);
  const auto cy_of = chare_lookup(spec.grid_cells, spec.chare_rows);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(spec.chare_cols * spec.chare_rows), 0);
  for (const auto& p : state.particles) {
    ++counts[static_cast<std::size_t>(cy_of[static_cast<std::size_t>(p.row)] * spec.chare_cols +
                                      cx_of[static_cast<std::size_t>(p.col)])];
  }
  return counts;
}

WorkloadSnapshot pic_to_snapshot(const PicState& state, std::optional<std::span<const NodeId>> placement) {
  const auto& spec = state.spec;
  validate(spec);
  const int cols = spec.chare_cols;
  const int rows = spec.chare_rows;
  const int c = spec.grid_cells;
  const auto chares = static_cast<std::size_t>(cols * rows);

  std::vector<NodeId> initial;
  std::span<const NodeId> place;
  if (placement) {
    if (placement->size() != chares) throw SpecError("placement size does not match chare count");
    place = *placement;
  } else {
    initial = pic_initial_placement(spec);
    place = initial;
  }

  const auto cx_of = chare_lookup(c, cols);
  const auto cy_of = chare_lookup(c, rows);
  std::vector<std::int64_t> counts(chares, 0);

  std::map<std::pair<ObjectId, ObjectId>, double> edge_bytes;
  auto key = [](ObjectId a, ObjectId b) { return a < b ? std::pair{a, b} : std::pair{b, a}; };
  auto id_of = [cols](int cx, int cy) { return static_cast<ObjectId>(cy) * cols + cx; };

  for (int cy = 0; cy < rows; ++cy) {
    for (int cx = 0; cx < cols; ++cx) {
      const ObjectId self = id_of(cx, cy);
      const ObjectId right = id_of((cx + 1) % cols, cy);
      const ObjectId down = id_of(cx, (cy + 1) % rows);
      if (right != self) edge_bytes[key(self, right)] = spec.bytes_halo_const;
      if (down != self) edge_bytes[key(self, down)] = spec.bytes_halo_const;
    }
  }

  const int dx = (2 * spec.k + 1) % c;
  const int dy = 1 % c;
  for (const auto& p : state.particles) {
    const int cx = cx_of[static_cast<std::size_t>(p.col)];
    const int cy = cy_of[static_cast<std::size_t>(p.row)];
    ++counts[static_cast<std::size_t>(id_of(cx, cy))];
    const int ncx = cx_of[static_cast<std::size_t>((p.col + dx) % c)];
    const int ncy = cy_of[static_cast<std::size_t>((p.row + dy) % c)];
    // Diagonal moves are charged as a horizontal hop followed by a vertical one.
    if (ncx != cx) edge_bytes[key(id_of(cx, cy), id_of(ncx, cy))] += spec.bytes_per_particle_crossing;
    if (ncy != cy) edge_bytes[key(id_of(ncx, cy), id_of(ncx, ncy))] += spec.bytes_per_particle_crossing;
  }

  WorkloadSnapshot s;
  s.node_count = spec.node_count;
  s.threads_per_node = 1;
  s.coord_dims = 2;
  s.periodic_dims = {true, true};
  s.objects.resize(chares);
  for (int cy = 0; cy < rows; ++cy) {
    const int y0 = chare_boundary(cy, c, rows);
    const int y1 = chare_boundary(cy + 1, c, rows);
    for (int cx = 0; cx < cols; ++cx) {
      const int x0 = chare_boundary(cx, c, cols);
      const int x1 = chare_boundary(cx + 1, c, cols);
      const auto id = id_of(cx, cy);
      auto& o = s.objects[static_cast<std::size_t>(id)];
      o.id = id;
      o.home_node = place[static_cast<std::size_t>(id)];
      o.home_thread = 0;
      const double cells = static_cast<double>(x1 - x0) * static_cast<double>(y1 - y0);
      o.load = spec.load_per_particle * static_cast<double>(counts[static_cast<std::size_t>(id)]) +
               spec.load_per_cell * cells;
      o.coords = {0.5 * (x0 + x1 - 1), 0.5 * (y0 + y1 - 1)};
    }
  }
  s.edges.reserve(edge_bytes.size());
  for (const auto& [k, bytes] : edge_bytes) s.edges.push_back({k.first, k.second, bytes});
  canonicalize(s);
  return s;
}

PicInitial gen_pic_initial(const PicSpec& spec) {
  PicInitial out;
  out.state = gen_pic_state(spec);
  out.snapshot = pic_to_snapshot(out.state);
  return out;
}

}  // namespace simlb
