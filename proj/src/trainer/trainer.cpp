#include "marl/trainer/trainer.hpp"

#include "marl/experts/llm_client.hpp"
#include "marl/finetune/dataset.hpp"
#include "marl/trainer/metrics.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>

namespace marl::trainer {

namespace {

// Independent substreams of the master seed. Evaluation uses none of them:
// its episode keys are pure functions of the episode index, so an eval pass
// can never perturb the training trajectory.
constexpr uint64_t kStreamInit = 0x696E6974ULL;
constexpr uint64_t kStreamExplore = 0x6578706CULL;
constexpr uint64_t kStreamReplay = 0x7265706CULL;
constexpr uint64_t kTrainEpisodeStream = 0x74726169ULL;
constexpr uint64_t kEvalEpisodeStream = 0x6576616CULL;
constexpr uint64_t kBaselineStream = 0x62617365ULL;

ActionSource source_from_plan(experts::ExpertSource source) {
  switch (source) {
    case experts::ExpertSource::a_star: return ActionSource::expert_a_star;
    case experts::ExpertSource::llm: return ActionSource::expert_llm;
    case experts::ExpertSource::fallback: return ActionSource::expert_fallback;
  }
  throw std::logic_error("unknown ExpertSource");
}

}  // namespace

CollectResult collect_step(const env::WorldConfig& world, env::WorldState& state,
                           qmix::Learner& learner, qmix::RecurrentState* recurrent,
                           experts::Expert* expert, Scalar epsilon, Rng& explore_rng) {
  const qmix::AlgorithmConfig& algo = learner.model().algorithm();
  const bool gate = expert != nullptr && algo.ensemble_size > 1 &&
                    !std::isinf(algo.uncertainty_threshold);
  const qmix::ActionSelection selection = learner.select_actions(state, recurrent, gate);

  CollectResult result;
  result.uncertainty = selection.uncertainty;
  std::vector<int> actions = selection.actions;
  if (gate && selection.uncertainty > algo.uncertainty_threshold) {
    const experts::ExpertPlan plan = expert->plan(state);
    if (plan.valid) {
      actions = plan.actions;
      result.source = source_from_plan(plan.source);
    } else {
      qmix::Learner::apply_epsilon(actions, epsilon, explore_rng);
      result.source = ActionSource::expert_fallback;
    }
  } else {
    qmix::Learner::apply_epsilon(actions, epsilon, explore_rng);
  }

  result.transition.observation = env::joint_observation(state);
  result.transition.actions = actions;
  const env::StepResult step_result = env::step(world, state, actions);
  result.transition.reward = step_result.reward;
  result.transition.next_observation = step_result.next_observation;
  result.transition.terminal = step_result.terminated;
  result.episode_over = step_result.terminated || step_result.truncated;
  result.collision_count = step_result.collision_count;
  return result;
}

EvalResult evaluate_policy(qmix::Learner& learner, const env::WorldConfig& world, int episodes,
                           uint64_t eval_key) {
  if (episodes < 1) throw ConfigError("evaluation needs at least one episode");
  std::vector<Scalar> returns;
  returns.reserve(episodes);
  int64_t collisions = 0;
  int64_t steps = 0;
  for (int e = 0; e < episodes; ++e) {
    auto [state, obs] = env::reset(
        world, mix_seed(mix_seed(kEvalEpisodeStream, eval_key), static_cast<uint64_t>(e)));
    qmix::RecurrentState recurrent = learner.model().zero_state();
    Scalar episode_return = 0;
    while (true) {
      const qmix::ActionSelection selection = learner.select_actions(state, &recurrent, false);
      const env::StepResult step_result = env::step(world, state, selection.actions);
      episode_return += step_result.reward;
      collisions += step_result.collision_count;
      ++steps;
      if (step_result.terminated || step_result.truncated) break;
    }
    returns.push_back(episode_return);
  }
  EvalResult result;
  result.mean_return = Eigen::Map<const Vector>(returns.data(), returns.size()).mean();
  result.std_return = qmix::population_std(returns);
  result.collision_rate = static_cast<Scalar>(collisions) / static_cast<Scalar>(steps);
  return result;
}

Scalar random_policy_return(const env::WorldConfig& world, int episodes, uint64_t seed) {
  if (episodes < 1) throw ConfigError("baseline needs at least one episode");
  Rng rng(seed, kBaselineStream);
  Scalar total = 0;
  std::vector<int> actions(world.n_agents);
  for (int e = 0; e < episodes; ++e) {
    auto [state, obs] = env::reset(
        world, mix_seed(mix_seed(kBaselineStream, seed), static_cast<uint64_t>(e)));
    while (true) {
      for (int& a : actions) a = rng.uniform_int(kNumActions);
      const env::StepResult step_result = env::step(world, state, actions);
      total += step_result.reward;
      if (step_result.terminated || step_result.truncated) break;
    }
  }
  return total / static_cast<Scalar>(episodes);
}

std::unique_ptr<experts::Expert> make_expert(const ExperimentConfig& config,
                                             const std::optional<std::filesystem::path>& transcript) {
  experts::GridSpec grid;
  grid.bounds = config.env.world_half_extent;
  switch (config.expert.kind) {
    case ExpertKind::none:
      return nullptr;
    case ExpertKind::a_star:
      return std::make_unique<experts::AStarExpert>(grid);
    case ExpertKind::llm:
      return std::make_unique<experts::LlmExpert>(
          experts::with_env_overrides(config.expert.llm),
          std::make_unique<experts::AStarExpert>(grid), transcript);
  }
  throw std::logic_error("unknown ExpertKind");
}

namespace {

void save_checkpoint(qmix::Learner& learner, const ExperimentConfig& config,
                     const std::filesystem::path& path) {
  nn::Checkpoint checkpoint;
  learner.save(checkpoint);
  checkpoint.put_text("config_yaml", config_to_yaml(config));
  checkpoint.save(path);
}

void write_diagnostic(const ExperimentPaths& paths, qmix::Learner& learner, int64_t step,
                      const std::deque<Scalar>& recent_losses, const std::string& what) {
  std::ofstream out(paths.diagnostic());
  out << "non-finite values during update\n"
      << "env_step: " << step << "\n"
      << "update_count: " << learner.update_count() << "\n"
      << "error: " << what << "\n"
      << "recent_losses:";
  for (Scalar loss : recent_losses) out << ' ' << format_scalar(loss);
  out << "\nparameter_norms:\n";
  for (const nn::ParamTensor* p : learner.model().all_parameters()) {
    out << "  " << p->name << ": value " << format_scalar(p->value.norm()) << ", grad "
        << format_scalar(p->grad.norm()) << "\n";
  }
}

}  // namespace

TrainResult train(const ExperimentConfig& config, const std::filesystem::path& output_root) {
  validate(config);
  const auto started = std::chrono::system_clock::now();
  ExperimentPaths paths =
      create_experiment_dir(output_root, config.experiment_name, config.training.seed, started);
  register_experiment(output_root, config.experiment_name, paths.dir, started);
  write_metadata(paths, config, started);

  if (config.fine_tune_vicuna) {
    finetune::generate_dataset(config, config.fine_tune_samples, paths.finetune_dataset());
  }

  qmix::Learner learner(config.env, config.algorithm,
                        mix_seed(config.training.seed, kStreamInit));
  std::unique_ptr<experts::Expert> expert =
      make_expert(config, config.expert.kind == ExpertKind::llm
                              ? std::optional(paths.llm_transcript())
                              : std::nullopt);
  ReplayBuffer replay(static_cast<size_t>(config.training.replay_capacity));
  Rng explore_rng(config.training.seed, kStreamExplore);
  Rng replay_rng(config.training.seed, kStreamReplay);
  MetricsWriter metrics(paths.dir);

  TrainResult result;
  result.paths = paths;

  // Exploration episodes vary with the env seed; evaluation episodes stay a
  // fixed benchmark set shared across runs (keyed only by eval_key).
  const uint64_t episode_stream = mix_seed(kTrainEpisodeStream, config.env.seed);
  uint64_t episode_index = 0;
  env::WorldState state = env::reset(config.env, mix_seed(episode_stream, episode_index)).first;
  qmix::RecurrentState recurrent = learner.model().zero_state();
  std::optional<Scalar> best;
  std::deque<Scalar> recent_losses;

  for (int64_t step = 1; step <= config.training.total_steps; ++step) {
    // A bad update usually surfaces one step later, when acting runs a
    // forward pass over the poisoned parameters — dump on either.
    try {
      const Scalar epsilon = config.algorithm.epsilon.at(step - 1);
      CollectResult collected =
          collect_step(config.env, state, learner, &recurrent, expert.get(), epsilon, explore_rng);
      if (collected.source != ActionSource::policy) ++result.expert_queries;
      if (collected.source == ActionSource::expert_fallback) ++result.fallbacks;
      replay.push(std::move(collected.transition));

      if (static_cast<int>(replay.size()) >= config.algorithm.batch_size) {
        const qmix::UpdateMetrics update = learner.update(replay, replay_rng);
        recent_losses.push_back(update.loss);
        if (recent_losses.size() > 50) recent_losses.pop_front();
        metrics.append(TrainMetricsRow{step, update.loss, collected.uncertainty,
                                       result.expert_queries, result.fallbacks});
        result.updates = update.update_index;
      }

      if (collected.episode_over) {
        ++episode_index;
        state = env::reset(config.env, mix_seed(episode_stream, episode_index)).first;
        recurrent = learner.model().zero_state();
      }

      if (step % config.training.eval_interval == 0) {
        const EvalResult eval =
            evaluate_policy(learner, config.env, config.training.eval_episodes);
        metrics.append(
            EvalMetricsRow{step, eval.mean_return, eval.std_return, eval.collision_rate});
        result.final_eval = eval;
        if (!best || eval.mean_return > *best) {
          best = eval.mean_return;
          save_checkpoint(learner, config, paths.best_checkpoint());
        }
      }
    } catch (const NumericError& e) {
      write_diagnostic(paths, learner, step, recent_losses, e.what());
      throw;
    }
  }

  save_checkpoint(learner, config, paths.final_checkpoint());
  result.best_eval_return = best;
  return result;
}

}  // namespace marl::trainer
