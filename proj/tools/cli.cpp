#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "simlb/core_model.hpp"
#include "simlb/strategy.hpp"

namespace simlb::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

/// Bad flag values found after CLI11 accepted the syntax; exits with 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<int> parse_dims(const std::string& text, const char* flag) {
  std::vector<int> dims;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != part.size() || v < 1) {
      throw UsageError(fmt::format("{} expects positive integers joined by 'x', got '{}'", flag, text));
    }
    dims.push_back(v);
  }
  if (dims.empty()) throw UsageError(fmt::format("{} is empty", flag));
  return dims;
}

ordered_json number(double x) {
  if (std::isfinite(x)) return x;
  return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path default_out_dir() {
  const char* env = std::getenv(kOutDirEnv);
  return env && *env ? fs::path(env) : fs::path("simlb-out");
}

/// Per-run directory plus the manifest listing everything written there.
class RunDir {
 public:
  RunDir(fs::path root, std::string command, std::vector<std::string> args)
      : root_(std::move(root)), command_(std::move(command)), args_(std::move(args)) {
    fs::create_directories(root_);
  }

  const fs::path& root() const { return root_; }

  void write(const std::string& rel, const std::string& text) {
    write_text(root_ / rel, text);
    files_.insert(rel);
  }

  void add(const std::string& rel) { files_.insert(rel); }

  void finish(const ordered_json& extra = ordered_json::object()) {
    ordered_json m;
    m["tool"] = "simlb";
    m["command"] = command_;
    m["args"] = args_;
    for (const auto& [k, v] : extra.items()) m[k] = v;
    m["files"] = std::vector<std::string>(files_.begin(), files_.end());
    write_text(root_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  fs::path root_;
  std::string command_;
  std::vector<std::string> args_;
  std::set<std::string> files_;
};

// ---------------------------------------------------------------------------
// Shared strategy flags

struct StrategyFlags {
  int k = 4;
  int max_rounds = 0;
  std::string tie_break = "lower-id";
  std::uint64_t seed = 0;
  bool allow_noncomm = false;
  double eps = 0.05;
  int max_iters = 100;
  double greedy_tol = 0.01;
  double thread_eps = 0.02;
  std::optional<std::int64_t> lb_every;
  std::optional<std::int64_t> steps;

  void add_to(CLI::App& app) {
    app.add_option("--neighbors,-k", k, "Neighbor count K for the diffusion strategies")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--max-rounds", max_rounds, "Handshake round limit; 0 selects 2K+4")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app.add_option("--tie-break", tie_break, "Equal-score neighbor ordering")
        ->check(CLI::IsMember({"lower-id", "seeded"}))
        ->capture_default_str();
    app.add_option("--seed", seed, "Seed for the seeded tie-break")->capture_default_str();
    app.add_flag("--allow-noncomm", allow_noncomm,
                 "Rank non-communicating nodes after real partners, lower ids first");
    app.add_option("--eps", eps, "Diffusion stop threshold relative to the mean load")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--max-iters", max_iters, "Diffusion iteration cap")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--greedy-tol", greedy_tol, "GreedyRefine tolerance above the mean")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app.add_option("--thread-eps", thread_eps, "Intra-node thread balance tolerance")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app.add_option("--lb-every", lb_every, "Balance every N steps (default 1, PIC 10)")->check(CLI::PositiveNumber);
    app.add_option("--steps", steps, "Application steps (default 1, PIC 200)")->check(CLI::PositiveNumber);
  }

  StrategyConfig config(StrategyKind kind) const {
    StrategyConfig c;
    c.kind = kind;
    c.k = k;
    c.max_rounds = max_rounds;
    c.tie_break = tie_break == "seeded" ? TieBreak::Seeded : TieBreak::LowerId;
    c.seed = seed;
    c.allow_noncomm_neighbors = allow_noncomm;
    c.diffusion.eps = eps;
    c.diffusion.max_iters = max_iters;
    c.greedy_tol = greedy_tol;
    c.thread_eps = thread_eps;
    return c;
  }

  SimulationOptions options(StrategyKind kind, bool pic) const {
    SimulationOptions o;
    o.strategy = config(kind);
    o.lb_every = lb_every.value_or(pic ? 10 : 1);
    o.steps = steps.value_or(pic ? 200 : 1);
    return o;
  }
};

StrategyKind strategy_or_throw(const std::string& name) {
  auto kind = parse_strategy(name);
  if (!kind) throw UsageError(fmt::format("unknown strategy '{}'", name));
  return *kind;
}

struct LoadedInput {
  SimulationInput input;
  WorkloadSnapshot initial;
  IdRemap remap;
  bool pic = false;
};

LoadedInput load_input(const std::string& path) {
  LoadedInput li;
  fs::path sidecar = pic_sidecar_path(path);
  if (path.size() > 9 && path.ends_with(".pic.json")) sidecar = path;
  if (fs::exists(sidecar)) {
    const PicSpec spec = pic_spec_from_json(nlohmann::json::parse(read_text(sidecar)));
    li.input.workload = spec;
    li.initial = gen_pic_initial(spec).snapshot;
    li.pic = true;
  } else {
    li.initial = load_snapshot(path, &li.remap);
    li.input.workload = li.initial;
  }
  return li;
}

ObjectId original_id(const IdRemap& remap, ObjectId dense) {
  return remap.identity() ? dense : remap.original_ids[static_cast<std::size_t>(dense)];
}

std::string series_csv(const MetricsReport& r, bool timing) {
  std::string out = "round,step,max_avg_load,ext_int_ratio,migration_fraction,migrated_objects,ext_bytes,int_bytes";
  const bool pic = !r.rounds.empty() && r.rounds.front().particle_max_avg.has_value();
  if (pic) out += ",particle_max_avg";
  if (timing) out += ",strategy_wall_time";
  out += '\n';
  for (const auto& rr : r.rounds) {
    const auto& m = rr.metrics;
    out += fmt::format("{},{},{},{},{},{},{},{}", rr.round, rr.step, m.max_avg_load, m.ext_int_ratio,
                       m.migration_fraction, m.migrated_objects, m.ext_bytes, m.int_bytes);
    if (pic) out += fmt::format(",{}", rr.particle_max_avg.value_or(0.0));
    if (timing) out += fmt::format(",{}", rr.strategy_wall_time);
    out += '\n';
  }
  return out;
}

std::string steps_csv(const MetricsReport& r) {
  std::string out = "step,max_avg_load,particle_max_avg";
  const std::size_t nodes = r.steps.empty() ? 0 : r.steps.front().node_particles.size();
  for (std::size_t v = 0; v < nodes; ++v) out += fmt::format(",node{}", v);
  out += '\n';
  for (const auto& st : r.steps) {
    out += fmt::format("{},{},{}", st.step, st.max_avg_load, st.particle_max_avg);
    for (auto c : st.node_particles) out += fmt::format(",{}", c);
    out += '\n';
  }
  return out;
}

std::string migrations_jsonl(const SimulationResult& res, const IdRemap& remap) {
  std::string out;
  for (std::size_t i = 0; i < res.plans.size(); ++i) {
    const auto& rr = res.report.rounds[i + 1];
    ordered_json line;
    line["round"] = rr.round;
    line["step"] = rr.step;
    auto moves = ordered_json::array();
    for (const auto& mv : res.plans[i].moves)
      moves.push_back({original_id(remap, mv.object), mv.from_node, mv.to_node});
    line["moves"] = std::move(moves);
    auto tmoves = ordered_json::array();
    for (const auto& tm : res.plans[i].thread_moves) tmoves.push_back({original_id(remap, tm.object), tm.to_thread});
    line["thread_moves"] = std::move(tmoves);
    out += line.dump() + '\n';
  }
  return out;
}

std::string snapshot_text(const WorkloadSnapshot& s) {
  std::ostringstream ss;
  write_snapshot(s, ss);
  return ss.str();
}

// ---------------------------------------------------------------------------
// gen

struct GenStencilFlags {
  std::string grid, nodes;
  bool no_periodic = false;
  std::string imbalance = "none";
  double fraction = 0.4;
  std::string scope = "object";
  std::uint64_t seed = 1;
  double overload = Mod7{}.overload;
  double underload = Mod7{}.underload;
  double spike_factor = 10.0;
  int spike_node = 0;
  double base_load = 1.0;
  double bytes = 1.0;
  int threads = 1;
  std::string out;
};

StencilSpec stencil_spec(const GenStencilFlags& f) {
  StencilSpec spec;
  spec.grid_dims = parse_dims(f.grid, "--grid");
  if (spec.grid_dims.size() != 2 && spec.grid_dims.size() != 3) throw UsageError("--grid needs 2 or 3 dimensions");
  if (f.nodes.starts_with("ring:")) {
    spec.decomposition = StripedRing{parse_dims(f.nodes.substr(5), "--nodes ring:N").at(0)};
  } else {
    spec.decomposition = TiledDecomposition{parse_dims(f.nodes, "--nodes")};
  }
  spec.periodic = !f.no_periodic;
  spec.base_load = f.base_load;
  spec.bytes_per_edge = f.bytes;
  spec.threads_per_node = f.threads;
  if (f.imbalance == "random") {
    spec.imbalance = RandomPct{f.fraction, f.seed, f.scope == "node" ? RandomScope::Node : RandomScope::Object};
  } else if (f.imbalance == "mod7") {
    spec.imbalance = Mod7{f.overload, f.underload};
  } else if (f.imbalance == "spike") {
    spec.imbalance = Spike{f.spike_factor, f.spike_node};
  }
  return spec;
}

struct GenPicFlags {
  PicSpec spec;
  std::string chares = "12x12";
  std::string mapping = "striped";
  std::string out;
};

// ---------------------------------------------------------------------------
// compare

struct CompareRow {
  std::string strategy;
  std::optional<MetricsReport> report;
  std::string error;
};

std::string compare_table(const Metrics& initial, const std::vector<CompareRow>& rows, bool pic) {
  std::size_t width = std::string("initial").size();
  for (const auto& r : rows) width = std::max(width, r.strategy.size());
  std::string out = fmt::format("{:<{}}  {:>8}  {:>8}  {:>8}", "strategy", width, "max/avg", "ext/int", "%migr");
  if (pic) out += fmt::format("  {:>14}", "mean p max/avg");
  out += '\n';
  out += fmt::format("{:<{}}  {:>8.3f}  {:>8.3f}  {:>8}\n", "initial", width, initial.max_avg_load,
                     initial.ext_int_ratio, "-");
  for (const auto& r : rows) {
    if (!r.report) {
      out += fmt::format("{:<{}}  failed: {}\n", r.strategy, width, r.error);
      continue;
    }
    const auto& m = r.report->final_metrics;
    out += fmt::format("{:<{}}  {:>8.3f}  {:>8.3f}  {:>8.1f}", r.strategy, width, m.max_avg_load, m.ext_int_ratio,
                       100.0 * m.migration_fraction);
    if (pic) out += fmt::format("  {:>14.3f}", r.report->mean_particle_max_avg.value_or(0.0));
    out += '\n';
  }
  return out;
}

ordered_json metrics_json(const Metrics& m) {
  ordered_json j;
  j["max_avg_load"] = number(m.max_avg_load);
  j["zero_load"] = m.zero_load;
  j["ext_bytes"] = number(m.ext_bytes);
  j["int_bytes"] = number(m.int_bytes);
  j["ext_int_ratio"] = number(m.ext_int_ratio);
  j["migration_fraction"] = number(m.migration_fraction);
  j["migrated_objects"] = m.migrated_objects;
  return j;
}

std::string sanitize(std::string s) {
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  return s;
}

}  // namespace

std::string pic_sidecar_path(const std::string& snapshot_path) { return snapshot_path + ".pic.json"; }

nlohmann::ordered_json to_json(const PicSpec& s) {
  ordered_json j;
  j["grid_cells"] = s.grid_cells;
  j["particles"] = s.particles;
  j["rho"] = s.rho;
  j["k"] = s.k;
  j["chare_cols"] = s.chare_cols;
  j["chare_rows"] = s.chare_rows;
  j["mapping"] = s.mapping == ChareMapping::Quad ? "quad" : "striped";
  j["node_count"] = s.node_count;
  j["seed"] = s.seed;
  j["bytes_per_particle_crossing"] = s.bytes_per_particle_crossing;
  j["bytes_halo_const"] = s.bytes_halo_const;
  j["load_per_particle"] = s.load_per_particle;
  j["load_per_cell"] = s.load_per_cell;
  return j;
}

PicSpec pic_spec_from_json(const nlohmann::json& j) {
  PicSpec s;
  try {
    s.grid_cells = j.at("grid_cells").get<int>();
    s.particles = j.at("particles").get<std::int64_t>();
    s.rho = j.at("rho").get<double>();
    s.k = j.at("k").get<int>();
    s.chare_cols = j.at("chare_cols").get<int>();
    s.chare_rows = j.at("chare_rows").get<int>();
    const auto mapping = j.at("mapping").get<std::string>();
    if (mapping != "striped" && mapping != "quad") throw std::runtime_error("unknown mapping '" + mapping + "'");
    s.mapping = mapping == "quad" ? ChareMapping::Quad : ChareMapping::Striped;
    s.node_count = j.at("node_count").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.bytes_per_particle_crossing = j.value("bytes_per_particle_crossing", s.bytes_per_particle_crossing);
    s.bytes_halo_const = j.value("bytes_halo_const", s.bytes_halo_const);
    s.load_per_particle = j.value("load_per_particle", s.load_per_particle);
    s.load_per_cell = j.value("load_per_cell", s.load_per_cell);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("bad PIC sidecar: ") + e.what());
  }
  validate(s);
  return s;
}

nlohmann::ordered_json to_json(const MetricsReport& r, bool timing) {
  ordered_json j;
  j["strategy"] = std::string(to_string(r.strategy));
  j["final"] = metrics_json(r.final_metrics);
  if (timing) j["total_strategy_wall_time"] = r.total_strategy_wall_time;
  if (r.mean_particle_max_avg) j["mean_particle_max_avg"] = number(*r.mean_particle_max_avg);
  auto rounds = ordered_json::array();
  for (const auto& rr : r.rounds) {
    ordered_json jr;
    jr["round"] = rr.round;
    jr["step"] = rr.step;
    jr["metrics"] = metrics_json(rr.metrics);
    if (rr.particle_max_avg) jr["particle_max_avg"] = number(*rr.particle_max_avg);
    if (timing) jr["strategy_wall_time"] = rr.strategy_wall_time;
    ordered_json d;
    d["graph_edges"] = rr.diagnostics.graph_edges;
    if (const auto& n = rr.diagnostics.neighbors) {
      d["handshake_rounds"] = n->rounds_used;
      d["isolated"] = n->isolated;
      d["unfilled"] = n->unfilled;
      d["empty_nodes"] = n->empty_nodes;
    }
    if (const auto& df = rr.diagnostics.diffusion) {
      d["diffusion_iterations"] = df->iterations;
      d["converged"] = df->converged;
      d["final_spread"] = number(df->final_spread);
      d["components"] = df->components;
      d["capped_nodes"] = df->capped_nodes;
    }
    auto transfers = ordered_json::array();
    for (const auto& t : rr.diagnostics.transfers) {
      ordered_json jt;
      jt["from"] = t.from;
      jt["to"] = t.to;
      jt["requested"] = number(t.requested);
      jt["sent"] = number(t.sent);
      jt["source_exhausted"] = t.source_exhausted;
      transfers.push_back(std::move(jt));
    }
    d["transfers"] = std::move(transfers);
    jr["diagnostics"] = std::move(d);
    rounds.push_back(std::move(jr));
  }
  j["rounds"] = std::move(rounds);
  return j;
}

std::string render_svg(const WorkloadSnapshot& s) {
  if (s.coord_dims < 2) throw std::invalid_argument("snapshot has no 2D coordinates to draw");
  std::set<double> xs, ys;
  for (const auto& o : s.objects) {
    xs.insert(o.coords[0]);
    ys.insert(o.coords[1]);
  }
  const double min_x = xs.empty() ? 0.0 : *xs.begin(), max_x = xs.empty() ? 0.0 : *xs.rbegin();
  const double min_y = ys.empty() ? 0.0 : *ys.begin(), max_y = ys.empty() ? 0.0 : *ys.rbegin();
  // Distinct coordinate counts set the cell pitch so lattices fill the canvas.
  const auto nx = static_cast<double>(std::max<std::size_t>(xs.size(), 1));
  const auto ny = static_cast<double>(std::max<std::size_t>(ys.size(), 1));
  const double pitch = std::clamp(800.0 / std::max(nx, ny), 2.0, 80.0);
  const double pad = 10.0;
  const double width = nx * pitch + 2 * pad, height = ny * pitch + 2 * pad;
  auto px = [&](double x) { return pad + pitch / 2 + (max_x > min_x ? (x - min_x) / (max_x - min_x) * (nx - 1) * pitch : 0.0); };
  // SVG y grows downward; flip so larger coordinates sit higher.
  auto py = [&](double y) {
    return height - pad - pitch / 2 - (max_y > min_y ? (y - min_y) / (max_y - min_y) * (ny - 1) * pitch : 0.0);
  };

  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.2f}\" height=\"{:.2f}\" viewBox=\"0 0 {:.2f} {:.2f}\">\n",
      width, height, width, height);
  out += fmt::format("<rect width=\"{:.2f}\" height=\"{:.2f}\" fill=\"white\"/>\n", width, height);
  const double r = 0.45 * pitch;
  for (const auto& o : s.objects) {
    const double hue = 360.0 * o.home_node / s.node_count;
    out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"{:.2f}\" fill=\"hsl({:.1f},70%,50%)\" data-node=\"{}\"/>\n",
                       px(o.coords[0]), py(o.coords[1]), r, hue, o.home_node);
  }
  out += "</svg>\n";
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Diffusion load balancing simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string out_dir;
  std::string run_name;
  app.add_option("--out-dir", out_dir, fmt::format("Output root (default ${} or ./simlb-out)", kOutDirEnv));

  // gen -----------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "Generate a workload snapshot");
  gen->require_subcommand(1);
  GenStencilFlags gs;
  auto* gen_stencil_cmd = gen->add_subcommand("stencil", "2D/3D stencil grid, one object per point");
  gen_stencil_cmd->add_option("--grid", gs.grid, "Objects per dimension, e.g. 96x96 or 32x32x16")->required();
  gen_stencil_cmd->add_option("--nodes", gs.nodes, "Tile grid such as 4x4, or ring:N for stripes")->required();
  gen_stencil_cmd->add_flag("--no-periodic", gs.no_periodic, "Drop wraparound edges");
  gen_stencil_cmd->add_option("--imbalance", gs.imbalance, "Synthetic imbalance")
      ->check(CLI::IsMember({"none", "random", "mod7", "spike"}))
      ->capture_default_str();
  gen_stencil_cmd->add_option("--fraction", gs.fraction, "random: relative load change")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  gen_stencil_cmd->add_option("--scope", gs.scope, "random: draw per object or per node")
      ->check(CLI::IsMember({"object", "node"}))
      ->capture_default_str();
  gen_stencil_cmd->add_option("--seed", gs.seed, "random: seed")->capture_default_str();
  gen_stencil_cmd->add_option("--overload", gs.overload, "mod7: overload multiplier")->capture_default_str();
  gen_stencil_cmd->add_option("--underload", gs.underload, "mod7: underload multiplier")->capture_default_str();
  gen_stencil_cmd->add_option("--spike-factor", gs.spike_factor, "spike: load multiplier")->capture_default_str();
  gen_stencil_cmd->add_option("--spike-node", gs.spike_node, "spike: overloaded node")->capture_default_str();
  gen_stencil_cmd->add_option("--base-load", gs.base_load, "Load per object before imbalance")->capture_default_str();
  gen_stencil_cmd->add_option("--bytes", gs.bytes, "Bytes per stencil edge")->capture_default_str();
  gen_stencil_cmd->add_option("--threads", gs.threads, "Threads per node")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen_stencil_cmd->add_option("--out,-o", gs.out, "Snapshot path (default: a run directory)");
  gen_stencil_cmd->add_option("--run-name", run_name, "Run directory name");

  GenPicFlags gp;
  auto* gen_pic_cmd = gen->add_subcommand("pic", "Particle-in-cell chare workload");
  gen_pic_cmd->add_option("--grid", gp.spec.grid_cells, "Cells per side")->capture_default_str();
  gen_pic_cmd->add_option("--particles", gp.spec.particles, "Particle count")->capture_default_str();
  gen_pic_cmd->add_option("--rho", gp.spec.rho, "Geometric column ratio")->capture_default_str();
  gen_pic_cmd->add_option("--k", gp.spec.k, "Horizontal speed parameter; particles move 2k+1 cells")
      ->capture_default_str();
  gen_pic_cmd->add_option("--chares", gp.chares, "Chare columns x rows")->capture_default_str();
  gen_pic_cmd->add_option("--mapping", gp.mapping, "Initial chare placement")
      ->check(CLI::IsMember({"striped", "quad"}))
      ->capture_default_str();
  gen_pic_cmd->add_option("--nodes", gp.spec.node_count, "Node count")->capture_default_str();
  gen_pic_cmd->add_option("--seed", gp.spec.seed, "Particle placement seed")->capture_default_str();
  gen_pic_cmd->add_option("--crossing-bytes", gp.spec.bytes_per_particle_crossing, "Bytes per boundary crossing")
      ->capture_default_str();
  gen_pic_cmd->add_option("--halo-bytes", gp.spec.bytes_halo_const, "Ghost exchange bytes per chare pair")
      ->capture_default_str();
  gen_pic_cmd->add_option("--load-per-particle", gp.spec.load_per_particle, "Load per particle")
      ->capture_default_str();
  gen_pic_cmd->add_option("--load-per-cell", gp.spec.load_per_cell, "Load per cell")->capture_default_str();
  gen_pic_cmd->add_option("--out,-o", gp.out, "Snapshot path; the spec goes to <path>.pic.json");
  gen_pic_cmd->add_option("--run-name", run_name, "Run directory name");

  // run -----------------------------------------------------------------
  auto* run_cmd = app.add_subcommand("run", "Balance a workload and write metrics");
  std::string input;
  std::string strategy_name = "diff-comm";
  bool snapshots = false, omit_timing = false;
  StrategyFlags sf;
  run_cmd->add_option("--input,-i", input, "Snapshot file (a .pic.json sidecar selects the PIC model)")->required();
  run_cmd->add_option("--strategy,-s", strategy_name, "diff-comm, diff-coord, greedy-refine or none")
      ->check(CLI::IsMember({"diff-comm", "diff-coord", "greedy-refine", "none"}))
      ->capture_default_str();
  sf.add_to(*run_cmd);
  run_cmd->add_flag("--snapshots", snapshots, "Write the snapshot after every round");
  run_cmd->add_flag("--omit-timing", omit_timing, "Leave wall times out so outputs are reproducible");
  run_cmd->add_option("--run-name", run_name, "Run directory name");

  // viz -----------------------------------------------------------------
  auto* viz_cmd = app.add_subcommand("viz", "Draw object placement as SVG");
  std::string viz_in, viz_out;
  viz_cmd->add_option("--input,-i", viz_in, "Snapshot with 2D coordinates")->required();
  viz_cmd->add_option("--out,-o", viz_out, "SVG path (default: a run directory)");
  viz_cmd->add_option("--run-name", run_name, "Run directory name");

  // compare -------------------------------------------------------------
  auto* cmp_cmd = app.add_subcommand("compare", "Run several strategies on one input");
  std::string cmp_in;
  std::vector<std::string> cmp_strategies = {"greedy-refine", "diff-comm", "diff-coord"};
  bool cmp_omit_timing = false;
  StrategyFlags cf;
  cmp_cmd->add_option("--input,-i", cmp_in, "Snapshot file")->required();
  cmp_cmd->add_option("--strategies", cmp_strategies, "Comma-separated strategies, in table order")
      ->delimiter(',')
      ->capture_default_str();
  cf.add_to(*cmp_cmd);
  cmp_cmd->add_flag("--omit-timing", cmp_omit_timing, "Leave wall times out");
  cmp_cmd->add_option("--run-name", run_name, "Run directory name");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const fs::path root = out_dir.empty() ? default_out_dir() : fs::path(out_dir);
  try {
    if (gen_stencil_cmd->parsed()) {
      const auto snap = gen_stencil(stencil_spec(gs));
      if (!gs.out.empty()) {
        save_snapshot(snap, gs.out);
      } else {
        RunDir dir(root / (run_name.empty() ? "gen-stencil" : run_name), "gen stencil", args);
        dir.write("snapshot.snap", snapshot_text(snap));
        dir.finish();
        out << (dir.root() / "snapshot.snap").string() << '\n';
      }
    } else if (gen_pic_cmd->parsed()) {
      const auto ch = parse_dims(gp.chares, "--chares");
      if (ch.size() != 2) throw UsageError("--chares needs columns x rows");
      gp.spec.chare_cols = ch[0];
      gp.spec.chare_rows = ch[1];
      gp.spec.mapping = gp.mapping == "quad" ? ChareMapping::Quad : ChareMapping::Striped;
      validate(gp.spec);
      const auto snap = gen_pic_initial(gp.spec).snapshot;
      const std::string sidecar = to_json(gp.spec).dump(2) + "\n";
      if (!gp.out.empty()) {
        save_snapshot(snap, gp.out);
        write_text(pic_sidecar_path(gp.out), sidecar);
      } else {
        RunDir dir(root / (run_name.empty() ? "gen-pic" : run_name), "gen pic", args);
        dir.write("snapshot.snap", snapshot_text(snap));
        dir.write("snapshot.snap.pic.json", sidecar);
        dir.finish();
        out << (dir.root() / "snapshot.snap").string() << '\n';
      }
    } else if (run_cmd->parsed()) {
      const StrategyKind kind = strategy_or_throw(strategy_name);
      const auto li = load_input(input);
      auto opt = sf.options(kind, li.pic);
      opt.keep_round_snapshots = snapshots;
      const auto res = run_simulation(li.input, opt);
      const bool timing = !omit_timing;
      const std::string name = run_name.empty()
                                   ? fmt::format("run-{}-k{}-seed{}", to_string(kind), sf.k, sf.seed)
                                   : run_name;
      RunDir dir(root / sanitize(name), "run", args);
      dir.write("metrics.json", to_json(res.report, timing).dump(2) + "\n");
      dir.write("series.csv", series_csv(res.report, timing));
      if (!res.report.steps.empty()) dir.write("steps.csv", steps_csv(res.report));
      dir.write("migrations.jsonl", migrations_jsonl(res, li.remap));
      dir.write("final.snap", snapshot_text(res.final_snapshot));
      if (!li.remap.identity()) {
        save_id_sidecar(li.remap, dir.root() / "ids.txt");
        dir.add("ids.txt");
      }
      for (std::size_t i = 0; i < res.round_snapshots.size(); ++i) {
        dir.write(fmt::format("snapshots/round_{:04}.snap", i), snapshot_text(res.round_snapshots[i]));
      }
      ordered_json extra;
      extra["input"] = input;
      extra["strategy"] = std::string(to_string(kind));
      extra["seed"] = sf.seed;
      dir.finish(extra);
      const auto& m = res.report.final_metrics;
      out << fmt::format("{}: max/avg {:.3f}  ext/int {:.3f}  migrations {:.1f}%\n", to_string(kind), m.max_avg_load,
                         m.ext_int_ratio, 100.0 * m.migration_fraction);
      if (res.report.mean_particle_max_avg)
        out << fmt::format("mean particle max/avg {:.3f}\n", *res.report.mean_particle_max_avg);
      out << dir.root().string() << '\n';
    } else if (viz_cmd->parsed()) {
      const std::string svg = render_svg(load_snapshot(viz_in));
      if (!viz_out.empty()) {
        write_text(viz_out, svg);
      } else {
        const std::string name = run_name.empty() ? "viz-" + sanitize(fs::path(viz_in).stem().string()) : run_name;
        RunDir dir(root / name, "viz", args);
        dir.write("placement.svg", svg);
        dir.finish();
        out << (dir.root() / "placement.svg").string() << '\n';
      }
    } else if (cmp_cmd->parsed()) {
      std::vector<StrategyKind> kinds;
      for (const auto& s : cmp_strategies) kinds.push_back(strategy_or_throw(s));
      const auto li = load_input(cmp_in);
      // Strategies run concurrently; rows keep the declared order.
      std::vector<std::future<SimulationResult>> jobs;
      for (auto kind : kinds) {
        jobs.push_back(std::async(std::launch::async, [&li, &cf, kind] {
          return run_simulation(li.input, cf.options(kind, li.pic));
        }));
      }
      std::vector<CompareRow> rows;
      for (std::size_t i = 0; i < kinds.size(); ++i) {
        CompareRow row{cmp_strategies[i], std::nullopt, {}};
        try {
          row.report = jobs[i].get().report;
        } catch (const std::exception& e) {
          row.error = e.what();
        }
        rows.push_back(std::move(row));
      }
      const Metrics initial = compute_metrics(li.initial);
      const bool timing = !cmp_omit_timing;
      ordered_json j;
      j["input"] = cmp_in;
      j["initial"] = metrics_json(initial);
      auto jr = ordered_json::array();
      bool failed = false;
      for (const auto& r : rows) {
        ordered_json e;
        e["strategy"] = r.strategy;
        if (r.report) {
          e["max_avg_load"] = number(r.report->final_metrics.max_avg_load);
          e["ext_int_ratio"] = number(r.report->final_metrics.ext_int_ratio);
          e["migration_percent"] = number(100.0 * r.report->final_metrics.migration_fraction);
          if (r.report->mean_particle_max_avg) e["mean_particle_max_avg"] = number(*r.report->mean_particle_max_avg);
          if (timing) e["strategy_wall_time"] = r.report->total_strategy_wall_time;
          e["report"] = to_json(*r.report, timing);
        } else {
          e["error"] = r.error;
          failed = true;
        }
        jr.push_back(std::move(e));
      }
      j["rows"] = std::move(jr);
      const std::string table = compare_table(initial, rows, li.pic);
      RunDir dir(root / (run_name.empty() ? fmt::format("compare-k{}-seed{}", cf.k, cf.seed) : sanitize(run_name)),
                 "compare", args);
      dir.write("compare.json", j.dump(2) + "\n");
      dir.write("compare.txt", table);
      dir.finish();
      out << table << dir.root().string() << '\n';
      if (failed) {
        for (const auto& r : rows)
          if (!r.report) err << fmt::format("error: strategy {} failed: {}\n", r.strategy, r.error);
        return kExitRuntime;
      }
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const SpecError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace simlb::cli
