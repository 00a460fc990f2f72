#pragma once

// Config-driven scenarios: parse, dispatch to the engines, collect data files
// and threshold checks, and write them together with a run manifest.

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace bohm::scenario {

using Json = nlohmann::json;

/// One threshold: passes when lo <= value <= hi.
struct Check {
  std::string name;
  double value = 0.0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool passed = false;
};

struct RunOptions {
  std::optional<std::uint64_t> seed;  // overrides the config seed
  std::string out_dir;                // empty: keep outputs in memory only
};

struct RunResult {
  std::string kind;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::vector<Check> checks;
  std::map<std::string, std::string> files;  // name -> contents
  Json summary;
  std::vector<std::string> written;  // paths, manifest last

  bool all_passed() const;
};

/// Kinds accepted in the "kind" field.
const std::vector<std::string>& kinds();

/// Validates and runs. Throws bohm::Error; nothing is written unless the run
/// completes.
RunResult run(const Json& config, const RunOptions& opts = {});

/// FNV-1a over the canonical (sorted-key) serialization.
std::uint64_t config_hash(const Json& config);

struct Preset {
  std::string name;
  std::string description;
  Json config;
};

const std::vector<Preset>& presets();
const Preset* find_preset(const std::string& name);

/// Tab-separated table: check, value, lo, hi, pass.
std::string format_checks(const std::vector<Check>& checks);

}  // namespace bohm::scenario
