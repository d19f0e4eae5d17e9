#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "newsalpha/core/error.hpp"
#include "newsalpha/core/hash.hpp"
#include "newsalpha/core/io.hpp"

namespace newsalpha {

#ifndef NEWSALPHA_VERSION
#define NEWSALPHA_VERSION "0.1.0"
#endif

inline constexpr const char* kToolVersion = NEWSALPHA_VERSION;

// Content hash of a file, or of a directory tree (relative paths and
// contents of every regular file, in path order).
inline std::string hash_path(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(path)) return hex64(fnv1a(io::read_file(path)));
  if (!fs::is_directory(path)) throw StorageError("cannot hash missing input " + path.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(path)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), path));
  }
  std::sort(files.begin(), files.end());
  Fnv1a h;
  for (const auto& f : files) h.field(f.generic_string()).field(io::read_file(path / f));
  return hex64(h.digest());
}

// Record of one CLI run; written last, after every output exists.
struct RunManifest {
  std::string command;
  std::vector<std::string> args;  // argv after the program name
  std::string working_directory;
  std::string config_hash;
  std::map<std::string, std::string> inputs;  // path as given -> content hash
  std::vector<std::uint64_t> seeds;
  std::string tool_version = kToolVersion;
  std::vector<std::string> outputs;  // relative to the output directory
  std::string started_at;            // UTC, ISO 8601
  double wall_seconds = 0.0;
};

inline std::string utc_now_iso() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  const auto day = std::chrono::floor<std::chrono::days>(now);
  const std::chrono::year_month_day ymd(day);
  const std::chrono::hh_mm_ss hms(now - day);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02lldZ", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()), long(hms.hours().count()),
                long(hms.minutes().count()), static_cast<long long>(hms.seconds().count()));
  return buf;
}

inline nlohmann::ordered_json to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["format"] = "newsalpha-run-manifest";
  j["version"] = 1;
  j["command"] = m.command;
  j["args"] = m.args;
  j["working_directory"] = m.working_directory;
  j["config_hash"] = m.config_hash;
  j["inputs"] = m.inputs;
  j["seeds"] = m.seeds;
  j["tool_version"] = m.tool_version;
  j["outputs"] = m.outputs;
  j["started_at"] = m.started_at;
  j["wall_seconds"] = m.wall_seconds;
  return j;
}

inline RunManifest run_manifest_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "newsalpha-run-manifest") throw ConfigError("not a run manifest");
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.args = j.at("args").get<std::vector<std::string>>();
  m.working_directory = j.value("working_directory", "");
  m.config_hash = j.value("config_hash", "");
  m.inputs = j.value("inputs", std::map<std::string, std::string>{});
  m.seeds = j.value("seeds", std::vector<std::uint64_t>{});
  m.tool_version = j.value("tool_version", "");
  m.outputs = j.value("outputs", std::vector<std::string>{});
  m.started_at = j.value("started_at", "");
  m.wall_seconds = j.value("wall_seconds", 0.0);
  return m;
}

// Inputs whose current content no longer matches the recorded hash.
inline std::vector<std::string> changed_inputs(const RunManifest& m,
                                               const std::filesystem::path& base) {
  std::vector<std::string> changed;
  for (const auto& [path, hash] : m.inputs) {
    const std::filesystem::path given(path);
    const std::filesystem::path p = given.is_absolute() ? given : base / given;
    try {
      if (hash_path(p) != hash) changed.push_back(path);
    } catch (const StorageError&) {
      changed.push_back(path);
    }
  }
  return changed;
}

// The recorded argument list with the value of --out replaced.
inline std::vector<std::string> with_output_dir(std::vector<std::string> args, const std::string& out) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--out" && i + 1 < args.size()) {
      args[i + 1] = out;
      return args;
    }
    if (args[i].rfind("--out=", 0) == 0) {
      args[i] = "--out=" + out;
      return args;
    }
  }
  args.push_back("--out");
  args.push_back(out);
  return args;
}

}  // namespace newsalpha
