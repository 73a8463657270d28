#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ami/harness/config.hpp"
#include "ami/harness/manifest.hpp"

namespace ami::harness {

/// One fully specified run: a subcommand, the resolved config, the
/// subcommand flags, the master seed and the output directory. Everything a
/// run does derives from these five values, which is what makes manifest
/// replay exact.
struct RunRequest {
  std::string subcommand;  // train-victims | attack | defend | detect |
                           // ablate | report
  HarnessConfig config;
  Json flags = Json::object();
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::string label;  // report grouping key; defaults to the subcommand
};

/// Executes the run, writes its artifacts plus manifest.json under
/// `req.out`, and returns the manifest. Path-valued flags are resolved to
/// absolute paths before they are recorded.
RunManifest execute_run(const RunRequest& req);

/// Re-executes the run a manifest describes into `out_dir`, then compares
/// every deterministic artifact hash against the manifest. Any divergence
/// raises IntegrityError; missing inputs raise ConfigError naming the path.
RunManifest replay_run(const std::filesystem::path& manifest_path,
                       const std::filesystem::path& out_dir);

/// AMI_OUT when set, otherwise "runs".
std::filesystem::path default_out_root();

/// Shortest round-trip decimal form of v, used for sweep directory names.
std::string format_compact(double v);

}  // namespace ami::harness
