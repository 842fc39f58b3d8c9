#pragma once

#include "marl/trainer/config.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace marl::finetune {

struct GenerationSummary {
  int64_t records = 0;
  int64_t episodes = 0;  // episodes touched (the last one may be partial)
  std::filesystem::path path;
};

/// Rolls the A* expert in the configured world and writes one JSON line per
/// step: {"messages": [user prompt, assistant action list], "episode_index",
/// "step_index"}. Exactly n_samples lines; deterministic under the config
/// seed; written via temp file + rename so readers never see a partial file.
GenerationSummary generate_dataset(const trainer::ExperimentConfig& config, int64_t n_samples,
                                   const std::filesystem::path& output_path);

struct Violation {
  int64_t line = 0;  // 1-based
  std::string reason;
};

struct ValidationReport {
  int64_t records = 0;
  bool empty = false;
  std::vector<Violation> violations;

  bool ok() const { return !empty && violations.empty(); }
};

/// Checks every line: JSON shape, prompt/assistant roles, and that the
/// completion parses back to a valid action list whose length matches the
/// count the prompt asks for. Malformed lines are reported, not fatal.
ValidationReport validate_dataset(const std::filesystem::path& path);

}  // namespace marl::finetune
