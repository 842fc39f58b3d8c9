#pragma once

#include "marl/trainer/config.hpp"

#include <chrono>
#include <filesystem>
#include <string>

namespace marl::trainer {

/// Layout of one experiment directory.
struct ExperimentPaths {
  std::filesystem::path dir;

  std::filesystem::path config() const { return dir / "config.yaml"; }
  std::filesystem::path metadata() const { return dir / "metadata.yaml"; }
  std::filesystem::path best_checkpoint() const { return dir / "checkpoint_best.bin"; }
  std::filesystem::path final_checkpoint() const { return dir / "checkpoint_final.bin"; }
  std::filesystem::path llm_transcript() const { return dir / "llm_transcript.jsonl"; }
  std::filesystem::path finetune_dataset() const { return dir / "finetune_dataset.jsonl"; }
  std::filesystem::path diagnostic() const { return dir / "diagnostic_dump.txt"; }
};

std::string timestamp_compact(std::chrono::system_clock::time_point t);  // 20260818-153000 (UTC)
std::string timestamp_iso8601(std::chrono::system_clock::time_point t);  // 2026-08-18T15:30:00Z

/// Creates "{name}_{seed}_{timestamp}" under root; a "-N" suffix keeps
/// directories unique when launches land on the same second.
ExperimentPaths create_experiment_dir(
    const std::filesystem::path& root, const std::string& name, uint64_t seed,
    std::chrono::system_clock::time_point now = std::chrono::system_clock::now());

/// metadata.yaml: name, seed, code version, creation time, and the resolved
/// config (also saved separately as config.yaml, reloadable by load_config).
void write_metadata(const ExperimentPaths& paths, const ExperimentConfig& resolved,
                    std::chrono::system_clock::time_point created);

/// Appends "name, ISO-8601 timestamp, dir" to {root}/experiments.txt.
void register_experiment(const std::filesystem::path& root, const std::string& name,
                         const std::filesystem::path& dir,
                         std::chrono::system_clock::time_point when);

}  // namespace marl::trainer
