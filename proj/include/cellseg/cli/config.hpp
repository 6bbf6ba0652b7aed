#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "cellseg/augment.hpp"
#include "cellseg/decode.hpp"
#include "cellseg/weights.hpp"

namespace cellseg::cli {

/// Everything a command may need, resolved from defaults, an optional JSON
/// config file and command-line flags (in increasing precedence).
struct PipelineConfig {
  int k = 2;
  std::uint64_t seed = 0;
  bool seed_explicit = false;  ///< seed came from a file or flag
  int threads = 1;
  W3Params w3{};
  AugmentSpec augment{};
  int augment_count = 4;
  DecodeOptions decode{};
  std::string data_dir;
  std::string out_dir;

  void validate() const;
  nlohmann::json to_json() const;
};

/// Parses a config tree. Unknown keys are rejected and listed by dotted path.
PipelineConfig config_from_json(const nlohmann::json& tree);
PipelineConfig load_config(const std::filesystem::path& path);

/// Seed fallback from the W3_SEED environment variable.
std::optional<std::uint64_t> seed_from_environment();

}  // namespace cellseg::cli
