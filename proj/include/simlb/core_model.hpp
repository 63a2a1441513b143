#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace simlb {

using ObjectId = std::int64_t;
using NodeId = int;

struct ObjectInfo {
  ObjectId id = 0;
  NodeId home_node = 0;
  int home_thread = 0;
  double load = 0.0;
  std::vector<double> coords;

  bool operator==(const ObjectInfo&) const = default;
};

/// Undirected communication edge; `bytes` aggregates both directions.
struct CommEdge {
  ObjectId a = 0;
  ObjectId b = 0;
  double bytes = 0.0;

  bool operator==(const CommEdge&) const = default;
};

/// Full system state handed to a strategy. After loading or generation the
/// ids are dense (object i lives at objects[i]).
struct WorkloadSnapshot {
  int node_count = 1;
  int threads_per_node = 1;
  int coord_dims = 0;
  std::vector<bool> periodic_dims;
  std::vector<ObjectInfo> objects;
  std::vector<CommEdge> edges;

  bool has_coords() const { return coord_dims > 0; }
  std::size_t object_count() const { return objects.size(); }

  bool operator==(const WorkloadSnapshot&) const = default;
};

struct Move {
  ObjectId object = 0;
  NodeId from_node = 0;
  NodeId to_node = 0;

  bool operator==(const Move&) const = default;
};

struct ThreadMove {
  ObjectId object = 0;
  int to_thread = 0;

  bool operator==(const ThreadMove&) const = default;
};

struct MigrationPlan {
  std::vector<Move> moves;
  std::vector<ThreadMove> thread_moves;

  bool empty() const { return moves.empty() && thread_moves.empty(); }
  bool operator==(const MigrationPlan&) const = default;
};

/// Unordered node pair, always stored with first < second.
using NodePair = std::pair<NodeId, NodeId>;
using NodeCommMatrix = std::map<NodePair, double>;

inline NodePair make_node_pair(NodeId i, NodeId j) {
  return i < j ? NodePair{i, j} : NodePair{j, i};
}

/// Raised when snapshot text cannot be parsed; carries the 1-based line.
class SnapshotParseError : public std::runtime_error {
 public:
  SnapshotParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Raised when a snapshot violates a data-model invariant.
class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws InvariantError naming the first offending object or edge.
/// Requires dense ids.
void validate(const WorkloadSnapshot& s);

/// Sorts objects by id and edges by (min, max) endpoint, normalizing each
/// edge so that a < b.
void canonicalize(WorkloadSnapshot& s);

/// Maps dense ids back to the ids found in the input file. Empty when the
/// input ids were already dense.
struct IdRemap {
  std::vector<ObjectId> original_ids;
  bool identity() const { return original_ids.empty(); }
};

WorkloadSnapshot parse_snapshot(std::istream& in, IdRemap* remap = nullptr);
void write_snapshot(const WorkloadSnapshot& s, std::ostream& out);

WorkloadSnapshot load_snapshot(const std::filesystem::path& path, IdRemap* remap = nullptr);
void save_snapshot(const WorkloadSnapshot& s, const std::filesystem::path& path);

/// Writes "original_id dense_id" lines next to a remapped snapshot.
void save_id_sidecar(const IdRemap& remap, const std::filesystem::path& path);

std::vector<double> node_loads(const WorkloadSnapshot& s);
double total_load(const WorkloadSnapshot& s);
double total_edge_bytes(const WorkloadSnapshot& s);

/// Bytes exchanged between each pair of distinct nodes; zero pairs omitted.
NodeCommMatrix node_comm_matrix(const WorkloadSnapshot& s);

/// Bytes on edges whose endpoints share a node.
double intra_node_bytes(const WorkloadSnapshot& s);

/// Object adjacency derived from the edge list, indexed by dense id.
struct Neighbor {
  ObjectId other = 0;
  double bytes = 0.0;
};
std::vector<std::vector<Neighbor>> object_adjacency(const WorkloadSnapshot& s);

}  // namespace simlb
