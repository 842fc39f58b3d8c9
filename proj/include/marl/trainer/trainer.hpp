#pragma once

#include "marl/experts/expert.hpp"
#include "marl/qmix/learner.hpp"
#include "marl/trainer/config.hpp"
#include "marl/trainer/experiment.hpp"
#include "marl/trainer/replay.hpp"

#include <filesystem>
#include <memory>
#include <optional>

namespace marl::trainer {

/// Where a step's executed joint action came from.
enum class ActionSource { policy, expert_a_star, expert_llm, expert_fallback };

struct CollectResult {
  Transition transition;
  ActionSource source = ActionSource::policy;
  Scalar uncertainty = 0.0;
  bool episode_over = false;
  int collision_count = 0;
};

/// One acting step: greedy Q selection, the uncertainty gate (expert query
/// when the ensemble disagrees enough), epsilon-greedy otherwise, then the
/// env transition. The gate needs an expert, ensemble_size > 1, and a finite
/// threshold; expert actions bypass epsilon.
CollectResult collect_step(const env::WorldConfig& world, env::WorldState& state,
                           qmix::Learner& learner, qmix::RecurrentState* recurrent,
                           experts::Expert* expert, Scalar epsilon, Rng& explore_rng);

struct EvalResult {
  Scalar mean_return = 0.0;
  Scalar std_return = 0.0;   // population std over episodes
  Scalar collision_rate = 0.0;  // colliding pairs per env step
};

/// Greedy (epsilon = 0, gate off) rollout over a fixed set of evaluation
/// episodes keyed by eval_key; consumes no learner or training RNG state.
EvalResult evaluate_policy(qmix::Learner& learner, const env::WorldConfig& world, int episodes,
                           uint64_t eval_key = 0);

/// Monte Carlo mean return of the uniform-random policy; the reference
/// baseline for learning checks.
Scalar random_policy_return(const env::WorldConfig& world, int episodes, uint64_t seed);

struct TrainResult {
  ExperimentPaths paths;
  EvalResult final_eval;
  std::optional<Scalar> best_eval_return;
  int64_t expert_queries = 0;
  int64_t fallbacks = 0;
  int64_t updates = 0;
};

/// Builds the expert an ExperimentConfig asks for (nullptr for none). The
/// llm expert applies LLM_BASE_URL / LLM_MODEL_NAME overrides and falls back
/// to A*; `transcript` enables its request log.
std::unique_ptr<experts::Expert> make_expert(
    const ExperimentConfig& config,
    const std::optional<std::filesystem::path>& transcript = std::nullopt);

/// The full training run: experiment dir + registry entry, optional
/// fine-tune dataset generation, collect/update loop with periodic greedy
/// evaluation, incremental metrics, and best/final checkpoints. Returns the
/// artifact locations.
TrainResult train(const ExperimentConfig& config, const std::filesystem::path& output_root);

}  // namespace marl::trainer
