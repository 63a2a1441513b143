#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "simlb/generators.hpp"
#include "simlb/metrics.hpp"

namespace simlb::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "SIMLB_OUT_DIR";

/// Runs one command line (args excludes the program name). Help and
/// diagnostics go to `out` and `err`; the return value is the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Sidecar written next to a PIC snapshot so `run` can advance particles.
std::string pic_sidecar_path(const std::string& snapshot_path);

nlohmann::ordered_json to_json(const PicSpec& spec);
PicSpec pic_spec_from_json(const nlohmann::json& j);

/// Metrics report as written to metrics.json. Wall times are dropped when
/// `timing` is false so that repeated runs compare byte for byte.
nlohmann::ordered_json to_json(const MetricsReport& report, bool timing);

/// One circle per object at its first two coordinates, filled by home node.
/// Throws std::invalid_argument when the snapshot has fewer than two
/// coordinate dimensions.
std::string render_svg(const WorkloadSnapshot& s);

}  // namespace simlb::cli
