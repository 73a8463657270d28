#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ami/harness/config.hpp"

namespace ami::harness {

/// One file a run consumed or produced. Artifact paths are relative to the
/// run directory so a run stays verifiable after being moved; input paths
/// are absolute because they live outside the run. Files flagged
/// non-deterministic (the wallclock sidecar) are checked for existence only.
struct ArtifactRecord {
  std::string path;
  std::string hash_hex;
  bool deterministic = true;
};

/// Everything needed to reproduce and verify a run: the resolved config
/// snapshot, the subcommand flags, the master seed, the environment shape
/// and the hashed file inventory. Invariant: every referenced file exists
/// and every deterministic hash matches.
struct RunManifest {
  int schema_version = 1;
  std::string subcommand;
  std::string label;
  std::uint64_t seed = 0;
  Json config;  // config_to_json snapshot; empty object for report runs
  Json flags;
  Json env_spec;
  std::string started_utc;
  std::string finished_utc;
  std::vector<ArtifactRecord> inputs;
  std::vector<ArtifactRecord> artifacts;
};

/// FNV-1a 64-bit over the file bytes, 16 hex digits. Not cryptographic;
/// it pins byte identity for replay comparisons.
std::string file_hash_hex(const std::filesystem::path& path);

std::string utc_timestamp();

Json manifest_to_json(const RunManifest& m);
RunManifest parse_manifest(const Json& j);
void save_manifest(const RunManifest& m, const std::filesystem::path& dir);
RunManifest load_manifest_file(const std::filesystem::path& path);

/// Hashes and appends a produced file; `rel` is relative to `dir`.
void record_artifact(RunManifest& m, const std::filesystem::path& dir,
                     const std::string& rel, bool deterministic = true);
/// Hashes and appends a consumed file under its absolute path.
void record_input(RunManifest& m, const std::filesystem::path& path);

/// Checks the manifest invariant against the directory holding the run.
/// Throws IntegrityError naming the first missing or mismatched file.
void verify_manifest(const RunManifest& m, const std::filesystem::path& dir);

}  // namespace ami::harness
