#include "simlb/core_model.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <string_view>
#include <tuple>
#include <unordered_map>

#include <fmt/format.h>

namespace simlb {

namespace {

constexpr std::string_view kMagic = "simlb-snapshot v1";

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view tok, std::size_t line, const char* field) {
  T value{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw SnapshotParseError(line, fmt::format("invalid {} '{}'", field, tok));
  }
  return value;
}

}  // namespace

void validate(const WorkloadSnapshot& s) {
  if (s.node_count < 1) throw InvariantError("node_count must be positive");
  if (s.threads_per_node < 1) throw InvariantError("threads_per_node must be positive");
  if (s.coord_dims < 0) throw InvariantError("coord_dims must be nonnegative");
  if (!s.periodic_dims.empty() && static_cast<int>(s.periodic_dims.size()) != s.coord_dims) {
    throw InvariantError("periodic flags must match coord_dims");
  }
  const auto n = static_cast<ObjectId>(s.objects.size());
  for (ObjectId i = 0; i < n; ++i) {
    const auto& o = s.objects[static_cast<std::size_t>(i)];
    if (o.id != i) throw InvariantError(fmt::format("object at position {} has id {} (ids must be dense)", i, o.id));
    if (!(o.load >= 0.0)) throw InvariantError(fmt::format("object {} has negative load {}", o.id, o.load));
    if (o.home_node < 0 || o.home_node >= s.node_count) {
      throw InvariantError(fmt::format("object {} home_node {} out of range", o.id, o.home_node));
    }
    if (o.home_thread < 0 || o.home_thread >= s.threads_per_node) {
      throw InvariantError(fmt::format("object {} home_thread {} out of range", o.id, o.home_thread));
    }
    if (static_cast<int>(o.coords.size()) != s.coord_dims) {
      throw InvariantError(fmt::format("object {} has {} coords, expected {}", o.id, o.coords.size(), s.coord_dims));
    }
  }
  std::set<std::pair<ObjectId, ObjectId>> seen;
  for (const auto& e : s.edges) {
    if (e.a < 0 || e.a >= n || e.b < 0 || e.b >= n) {
      throw InvariantError(fmt::format("edge ({}, {}) references a missing object", e.a, e.b));
    }
    if (e.a == e.b) throw InvariantError(fmt::format("edge ({}, {}) is a self loop", e.a, e.b));
    if (!(e.bytes >= 0.0)) throw InvariantError(fmt::format("edge ({}, {}) has negative bytes", e.a, e.b));
    if (!seen.emplace(std::min(e.a, e.b), std::max(e.a, e.b)).second) {
      throw InvariantError(fmt::format("duplicate edge ({}, {})", e.a, e.b));
    }
  }
}

void canonicalize(WorkloadSnapshot& s) {
  std::sort(s.objects.begin(), s.objects.end(),
            [](const ObjectInfo& x, const ObjectInfo& y) { return x.id < y.id; });
  for (auto& e : s.edges) {
    if (e.a > e.b) std::swap(e.a, e.b);
  }
  std::sort(s.edges.begin(), s.edges.end(), [](const CommEdge& x, const CommEdge& y) {
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });
}

WorkloadSnapshot parse_snapshot(std::istream& in, IdRemap* remap) {
  WorkloadSnapshot s;
  std::string raw;
  std::size_t line_no = 0;
  bool have_magic = false;
  bool have_header = false;

  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto tok = split_ws(line);
    if (tok.empty()) continue;

    if (!have_magic) {
      if (tok.size() != 2 || tok[0] != "simlb-snapshot" || tok[1] != "v1") {
        throw SnapshotParseError(line_no, fmt::format("expected '{}'", kMagic));
      }
      have_magic = true;
      continue;
    }

    const auto kind = tok[0];
    if (kind == "H") {
      if (have_header) throw SnapshotParseError(line_no, "duplicate header");
      if (tok.size() < 4) throw SnapshotParseError(line_no, "header needs node_count threads coord_dims");
      s.node_count = parse_number<int>(tok[1], line_no, "node_count");
      s.threads_per_node = parse_number<int>(tok[2], line_no, "threads_per_node");
      s.coord_dims = parse_number<int>(tok[3], line_no, "coord_dims");
      if (s.coord_dims < 0) throw SnapshotParseError(line_no, "coord_dims must be nonnegative");
      const auto flags = tok.size() - 4;
      if (flags != 0 && flags != static_cast<std::size_t>(s.coord_dims)) {
        throw SnapshotParseError(line_no, "periodic flags must be absent or one per coordinate dimension");
      }
      for (std::size_t i = 4; i < tok.size(); ++i) {
        const int f = parse_number<int>(tok[i], line_no, "periodic flag");
        if (f != 0 && f != 1) throw SnapshotParseError(line_no, "periodic flag must be 0 or 1");
        s.periodic_dims.push_back(f == 1);
      }
      have_header = true;
    } else if (kind == "O") {
      if (!have_header) throw SnapshotParseError(line_no, "object record before header");
      const auto expected = 5 + static_cast<std::size_t>(s.coord_dims);
      if (tok.size() != expected) {
        throw SnapshotParseError(line_no, fmt::format("object record needs {} fields, got {}", expected, tok.size()));
      }
      ObjectInfo o;
      o.id = parse_number<ObjectId>(tok[1], line_no, "object id");
      o.home_node = parse_number<int>(tok[2], line_no, "node");
      o.home_thread = parse_number<int>(tok[3], line_no, "thread");
      o.load = parse_number<double>(tok[4], line_no, "load");
      for (std::size_t i = 5; i < tok.size(); ++i) o.coords.push_back(parse_number<double>(tok[i], line_no, "coordinate"));
      s.objects.push_back(std::move(o));
    } else if (kind == "E") {
      if (!have_header) throw SnapshotParseError(line_no, "edge record before header");
      if (tok.size() != 4) throw SnapshotParseError(line_no, "edge record needs 'E a b bytes'");
      CommEdge e;
      e.a = parse_number<ObjectId>(tok[1], line_no, "edge endpoint");
      e.b = parse_number<ObjectId>(tok[2], line_no, "edge endpoint");
      e.bytes = parse_number<double>(tok[3], line_no, "bytes");
      s.edges.push_back(e);
    } else {
      throw SnapshotParseError(line_no, fmt::format("unknown record type '{}'", kind));
    }
  }
  if (!have_magic) throw SnapshotParseError(line_no, "empty input");
  if (!have_header) throw SnapshotParseError(line_no, "missing header");

  std::sort(s.objects.begin(), s.objects.end(),
            [](const ObjectInfo& x, const ObjectInfo& y) { return x.id < y.id; });
  for (std::size_t i = 1; i < s.objects.size(); ++i) {
    if (s.objects[i].id == s.objects[i - 1].id) {
      throw InvariantError(fmt::format("duplicate object id {}", s.objects[i].id));
    }
  }

  bool dense = true;
  for (std::size_t i = 0; i < s.objects.size(); ++i) dense = dense && s.objects[i].id == static_cast<ObjectId>(i);
  if (!dense) {
    std::unordered_map<ObjectId, ObjectId> to_dense;
    IdRemap local;
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      local.original_ids.push_back(s.objects[i].id);
      to_dense.emplace(s.objects[i].id, static_cast<ObjectId>(i));
      s.objects[i].id = static_cast<ObjectId>(i);
    }
    for (auto& e : s.edges) {
      auto ia = to_dense.find(e.a);
      auto ib = to_dense.find(e.b);
      if (ia == to_dense.end() || ib == to_dense.end()) {
        throw InvariantError(fmt::format("edge ({}, {}) references a missing object", e.a, e.b));
      }
      e.a = ia->second;
      e.b = ib->second;
    }
    if (remap) *remap = std::move(local);
  } else if (remap) {
    remap->original_ids.clear();
  }

  canonicalize(s);
  validate(s);
  return s;
}

void write_snapshot(const WorkloadSnapshot& s, std::ostream& out) {
  WorkloadSnapshot c = s;
  canonicalize(c);
  out << kMagic << '\n';
  out << "# node_count threads_per_node coord_dims [periodic flags]\n";
  out << fmt::format("H {} {} {}", c.node_count, c.threads_per_node, c.coord_dims);
  for (bool p : c.periodic_dims) out << (p ? " 1" : " 0");
  out << '\n';
  out << "# objects: O id node thread load [coords]\n";
  std::string buf;
  for (const auto& o : c.objects) {
    buf = fmt::format("O {} {} {} {}", o.id, o.home_node, o.home_thread, o.load);
    for (double x : o.coords) fmt::format_to(std::back_inserter(buf), " {}", x);
    buf.push_back('\n');
    out << buf;
  }
  out << "# edges: E a b bytes\n";
  for (const auto& e : c.edges) out << fmt::format("E {} {} {}\n", e.a, e.b, e.bytes);
}

WorkloadSnapshot load_snapshot(const std::filesystem::path& path, IdRemap* remap) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open snapshot " + path.string());
  try {
    return parse_snapshot(in, remap);
  } catch (const SnapshotParseError& e) {
    throw SnapshotParseError(e.line(), path.string() + ": " + e.what());
  }
}

void save_snapshot(const WorkloadSnapshot& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write snapshot " + path.string());
  write_snapshot(s, out);
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void save_id_sidecar(const IdRemap& remap, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# original_id dense_id\n";
  for (std::size_t i = 0; i < remap.original_ids.size(); ++i) out << remap.original_ids[i] << ' ' << i << '\n';
}

std::vector<double> node_loads(const WorkloadSnapshot& s) {
  std::vector<double> loads(static_cast<std::size_t>(s.node_count), 0.0);
  for (const auto& o : s.objects) loads[static_cast<std::size_t>(o.home_node)] += o.load;
  return loads;
}

double total_load(const WorkloadSnapshot& s) {
  double sum = 0.0;
  for (const auto& o : s.objects) sum += o.load;
  return sum;
}

double total_edge_bytes(const WorkloadSnapshot& s) {
  double sum = 0.0;
  for (const auto& e : s.edges) sum += e.bytes;
  return sum;
}

NodeCommMatrix node_comm_matrix(const WorkloadSnapshot& s) {
  NodeCommMatrix m;
  for (const auto& e : s.edges) {
    const auto na = s.objects[static_cast<std::size_t>(e.a)].home_node;
    const auto nb = s.objects[static_cast<std::size_t>(e.b)].home_node;
    if (na == nb || e.bytes == 0.0) continue;
    m[make_node_pair(na, nb)] += e.bytes;
  }
  return m;
}

double intra_node_bytes(const WorkloadSnapshot& s) {
  double sum = 0.0;
  for (const auto& e : s.edges) {
    if (s.objects[static_cast<std::size_t>(e.a)].home_node == s.objects[static_cast<std::size_t>(e.b)].home_node) {
      sum += e.bytes;
    }
  }
  return sum;
}

std::vector<std::vector<Neighbor>> object_adjacency(const WorkloadSnapshot& s) {
  std::vector<std::vector<Neighbor>> adj(s.objects.size());
  for (const auto& e : s.edges) {
    adj[static_cast<std::size_t>(e.a)].push_back({e.b, e.bytes});
    adj[static_cast<std::size_t>(e.b)].push_back({e.a, e.bytes});
  }
  return adj;
}

}  // namespace simlb
