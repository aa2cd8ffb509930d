#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cir/core/cir.hpp"
#include "cir/pipeline/pipeline.hpp"
#include "cir/sim/dataset.hpp"

namespace cir::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitRuntime = 3;

/// Everything one experiment needs. `preset` is "D1", "D2-step-<k>" or
/// "custom"; dataset fields in the file override the preset.
struct ExperimentConfig {
  std::string preset = "D1";
  sim::DatasetConfig data;
  core::CoreConfig model;
  pipeline::TrainConfig train;
  std::optional<std::uint64_t> seed;
  std::filesystem::path data_dir;
  std::filesystem::path checkpoint;
  std::filesystem::path report;
};

/// Throws sim::ConfigError on unknown keys, wrong types or invalid values.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig default_config();

/// Entry point shared by the executable and the tests. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cir::cli
