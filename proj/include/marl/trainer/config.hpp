#pragma once

#include "marl/env/world.hpp"
#include "marl/experts/llm_client.hpp"
#include "marl/qmix/model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace marl::trainer {

enum class ExpertKind { none, a_star, llm };

std::string to_string(ExpertKind kind);                 // "none" | "a-star" | "llm"
ExpertKind expert_kind_from_string(const std::string& text);

struct ExpertConfig {
  ExpertKind kind = ExpertKind::none;
  experts::LlmEndpointConfig llm;

  bool operator==(const ExpertConfig&) const = default;
};

struct TrainingConfig {
  int64_t total_steps = 20000;
  int64_t eval_interval = 1000;
  int eval_episodes = 10;
  int64_t replay_capacity = 50000;
  uint64_t seed = 1;

  bool operator==(const TrainingConfig&) const = default;
};

struct ExperimentConfig {
  std::string experiment_name = "experiment";
  env::WorldConfig env;
  qmix::AlgorithmConfig algorithm;
  ExpertConfig expert;
  bool fine_tune_vicuna = false;
  int64_t fine_tune_samples = 1000;
  TrainingConfig training;

  bool operator==(const ExperimentConfig&) const = default;
};

void validate(const ExperimentConfig& config);

/// Strict YAML load: unknown keys are rejected by name, missing keys take
/// the documented defaults, and env.seed falls back to training.seed when
/// omitted. The result is validated.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& yaml_text);

std::string config_to_yaml(const ExperimentConfig& config);
void save_config(const std::filesystem::path& path, const ExperimentConfig& config);

}  // namespace marl::trainer
