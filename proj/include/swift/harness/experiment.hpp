#pragma once

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace swift::harness {

using Json = nlohmann::json;

/// Everything needed to repeat a run: what was executed, on which inputs,
/// and what it produced.
struct RunManifest {
  std::string command;  // factorize | project | noise | costmat
  Json config;          // full parameter snapshot, paths absolute
  std::map<std::string, std::string> input_digests;   // path -> sha256
  std::map<std::string, std::string> output_digests;  // file name -> sha256
  std::map<std::string, double> timings;              // phase -> seconds
  std::vector<std::string> notes;
  Json results;
  std::string version;

  Json to_json() const;
  static RunManifest from_json(const Json& j);
  void save(const std::filesystem::path& path) const;
  static RunManifest load(const std::filesystem::path& path);
};

/// Where `execute` puts the manifest: inside the output directory for
/// factorize/project, next to the output file otherwise.
std::filesystem::path manifest_location(const std::string& command, const Json& config);

/// Version string stamped into every manifest.
std::string code_version();

/// Fills in defaults for `command` and resolves relative paths against
/// `base`. Unknown keys are rejected.
Json normalize_config(const std::string& command, Json config,
                      const std::filesystem::path& base = std::filesystem::current_path());

/// Runs one command with a normalized config, writes its outputs and
/// manifest.json into config["out"], and returns the manifest.
RunManifest execute(const std::string& command, const Json& config);

/// Loads an experiment config file ({"command": ..., ...}; command defaults to
/// factorize) or a manifest.json, and executes it.
RunManifest run_experiment(const std::filesystem::path& config_path);

/// Re-executes a manifest into `out_dir` (the original location when empty)
/// after checking that the inputs still hash the same. `parallel` overrides
/// the recorded setting; outputs do not depend on it.
RunManifest rerun(const std::filesystem::path& manifest_path,
                  const std::filesystem::path& out_dir = {},
                  std::optional<bool> parallel = std::nullopt);

/// File names whose digests differ between two manifests.
std::vector<std::string> differing_outputs(const RunManifest& a, const RunManifest& b);

}  // namespace swift::harness
