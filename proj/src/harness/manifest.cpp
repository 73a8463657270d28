#include "ami/harness/manifest.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

namespace ami::harness {
namespace {

namespace fs = std::filesystem;

ArtifactRecord record_from_json(const Json& j, const char* section) {
  if (!j.is_object() || !j.contains("path") || !j.contains("hash") ||
      !j.contains("deterministic")) {
    throw ConfigError(std::string("manifest ") + section +
                      " entries need path, hash and deterministic fields");
  }
  ArtifactRecord r;
  try {
    r.path = j["path"].get<std::string>();
    r.hash_hex = j["hash"].get<std::string>();
    r.deterministic = j["deterministic"].get<bool>();
  } catch (const Json::exception&) {
    throw ConfigError(std::string("manifest ") + section +
                      " entry has wrongly typed fields");
  }
  return r;
}

Json record_to_json(const ArtifactRecord& r) {
  Json j;
  j["path"] = r.path;
  j["hash"] = r.hash_hex;
  j["deterministic"] = r.deterministic;
  return j;
}

void check_entry(const ArtifactRecord& r, const fs::path& resolved,
                 const char* kind) {
  if (!fs::exists(resolved)) {
    throw IntegrityError(std::string("manifest ") + kind +
                         " missing: " + resolved.string());
  }
  if (r.deterministic && file_hash_hex(resolved) != r.hash_hex) {
    throw IntegrityError(std::string("manifest ") + kind +
                         " hash mismatch: " + resolved.string());
  }
}

}  // namespace

std::string file_hash_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open file for hashing: " + path.string());
  }
  std::uint64_t h = 1469598103934665603ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (!in) break;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(out);
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string(buf);
}

Json manifest_to_json(const RunManifest& m) {
  Json j;
  j["schema_version"] = m.schema_version;
  j["subcommand"] = m.subcommand;
  j["label"] = m.label;
  j["seed"] = m.seed;
  j["config"] = m.config;
  j["flags"] = m.flags;
  j["env_spec"] = m.env_spec;
  j["started_utc"] = m.started_utc;
  j["finished_utc"] = m.finished_utc;
  Json inputs = Json::array();
  for (const auto& r : m.inputs) inputs.push_back(record_to_json(r));
  j["inputs"] = inputs;
  Json artifacts = Json::array();
  for (const auto& r : m.artifacts) artifacts.push_back(record_to_json(r));
  j["artifacts"] = artifacts;
  return j;
}

RunManifest parse_manifest(const Json& j) {
  if (!j.is_object()) {
    throw ConfigError("manifest must be a JSON object");
  }
  static const char* allowed[] = {"schema_version", "subcommand", "label",
                                  "seed",           "config",     "flags",
                                  "env_spec",       "started_utc",
                                  "finished_utc",   "inputs",     "artifacts"};
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (item.key() == a) {
        known = true;
        break;
      }
    }
    if (!known) {
      std::ostringstream msg;
      msg << "unknown key \"" << item.key() << "\" in manifest; valid keys: ";
      for (std::size_t i = 0; i < std::size(allowed); ++i) {
        if (i) msg << ", ";
        msg << allowed[i];
      }
      throw ConfigError(msg.str());
    }
  }
  RunManifest m;
  try {
    m.schema_version = j.value("schema_version", 1);
    if (m.schema_version != 1) {
      throw ConfigError("unsupported manifest schema_version " +
                        std::to_string(m.schema_version) +
                        "; this build reads 1");
    }
    m.subcommand = j.value("subcommand", std::string());
    m.label = j.value("label", std::string());
    m.seed = j.value("seed", std::uint64_t{0});
    m.config = j.value("config", Json::object());
    m.flags = j.value("flags", Json::object());
    m.env_spec = j.value("env_spec", Json::object());
    m.started_utc = j.value("started_utc", std::string());
    m.finished_utc = j.value("finished_utc", std::string());
  } catch (const Json::exception&) {
    throw ConfigError("manifest header fields have wrong types");
  }
  if (j.contains("inputs")) {
    for (const auto& e : j["inputs"]) {
      m.inputs.push_back(record_from_json(e, "inputs"));
    }
  }
  if (j.contains("artifacts")) {
    for (const auto& e : j["artifacts"]) {
      m.artifacts.push_back(record_from_json(e, "artifacts"));
    }
  }
  return m;
}

void save_manifest(const RunManifest& m, const std::filesystem::path& dir) {
  std::ofstream out(dir / "manifest.json");
  if (!out) {
    throw ConfigError("cannot write manifest in " + dir.string());
  }
  out << manifest_to_json(m).dump(2) << "\n";
}

RunManifest load_manifest_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("manifest not found: " + path.string());
  }
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ConfigError("manifest " + path.string() + " is not valid JSON: " +
                      e.what());
  }
  return parse_manifest(j);
}

void record_artifact(RunManifest& m, const std::filesystem::path& dir,
                     const std::string& rel, bool deterministic) {
  ArtifactRecord r;
  r.path = rel;
  r.hash_hex = file_hash_hex(dir / rel);
  r.deterministic = deterministic;
  m.artifacts.push_back(std::move(r));
}

void record_input(RunManifest& m, const std::filesystem::path& path) {
  ArtifactRecord r;
  const fs::path abs = fs::absolute(path);
  r.path = abs.string();
  r.hash_hex = file_hash_hex(abs);
  r.deterministic = true;
  m.inputs.push_back(std::move(r));
}

void verify_manifest(const RunManifest& m, const std::filesystem::path& dir) {
  for (const auto& r : m.inputs) {
    check_entry(r, fs::path(r.path), "input");
  }
  for (const auto& r : m.artifacts) {
    check_entry(r, dir / r.path, "artifact");
  }
}

}  // namespace ami::harness
