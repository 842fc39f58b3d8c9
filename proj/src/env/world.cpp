#include "marl/env/world.hpp"

#include "marl/rng.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace marl::env {

void validate(const WorldConfig& config) {
  if (config.n_agents < 1) throw ConfigError("env.n_agents must be >= 1");
  if (config.n_landmarks < 1) throw ConfigError("env.n_landmarks must be >= 1");
  if (config.horizon < 1) throw ConfigError("env.horizon must be >= 1");
  if (!(config.step_size > 0)) throw ConfigError("env.step_size must be > 0");
  if (!(config.collision_radius > 0)) throw ConfigError("env.collision_radius must be > 0");
  if (!(config.world_half_extent > 0)) throw ConfigError("env.world_half_extent must be > 0");
  if (config.collision_penalty < 0) throw ConfigError("env.collision_penalty must be >= 0");
}

Vector joint_observation(const WorldState& state) {
  const int n = state.n_agents();
  const int m = state.n_landmarks();
  Vector obs(2 * (n + m));
  for (int i = 0; i < n; ++i) obs.segment<2>(2 * i) = state.agent_positions.col(i);
  for (int j = 0; j < m; ++j) obs.segment<2>(2 * (n + j)) = state.landmark_positions.col(j);
  return obs;
}

std::pair<WorldState, Vector> reset(const WorldConfig& config, uint64_t episode_seed) {
  validate(config);
  Rng rng(config.seed, episode_seed);
  const Scalar b = config.world_half_extent;

  WorldState state;
  state.agent_positions.resize(2, config.n_agents);
  state.landmark_positions.resize(2, config.n_landmarks);
  for (int i = 0; i < config.n_agents; ++i) {
    state.agent_positions(0, i) = rng.uniform(-b, b);
    state.agent_positions(1, i) = rng.uniform(-b, b);
  }
  for (int j = 0; j < config.n_landmarks; ++j) {
    state.landmark_positions(0, j) = rng.uniform(-b, b);
    state.landmark_positions(1, j) = rng.uniform(-b, b);
  }
  state.step_index = 0;
  return {state, joint_observation(state)};
}

StepResult step(const WorldConfig& config, WorldState& state, std::span<const int> actions) {
  const int n = state.n_agents();
  if (static_cast<int>(actions.size()) != n) {
    throw std::invalid_argument("step: expected " + std::to_string(n) + " actions, got " +
                                std::to_string(actions.size()));
  }
  const Scalar b = config.world_half_extent;
  const Scalar s = config.step_size;

  for (int i = 0; i < n; ++i) {
    const int a = actions[i];
    switch (a) {
      case 0: break;
      case 1: state.agent_positions(0, i) -= s; break;
      case 2: state.agent_positions(0, i) += s; break;
      case 3: state.agent_positions(1, i) -= s; break;
      case 4: state.agent_positions(1, i) += s; break;
      default:
        throw std::invalid_argument("step: action " + std::to_string(a) + " for agent " +
                                    std::to_string(i) + " is outside {0..4}");
    }
    state.agent_positions(0, i) = std::clamp(state.agent_positions(0, i), -b, b);
    state.agent_positions(1, i) = std::clamp(state.agent_positions(1, i), -b, b);
  }

  Scalar distance_term = 0.0;
  for (int j = 0; j < state.n_landmarks(); ++j) {
    Scalar best = std::numeric_limits<Scalar>::infinity();
    for (int i = 0; i < n; ++i) {
      best = std::min(best, (state.agent_positions.col(i) - state.landmark_positions.col(j)).norm());
    }
    distance_term += best;
  }

  int collisions = 0;
  for (int i = 0; i < n; ++i) {
    for (int k = i + 1; k < n; ++k) {
      if ((state.agent_positions.col(i) - state.agent_positions.col(k)).norm() <
          config.collision_radius) {
        ++collisions;
      }
    }
  }

  state.step_index += 1;

  StepResult result;
  result.next_observation = joint_observation(state);
  result.reward = -distance_term - config.collision_penalty * collisions;
  result.terminated = false;
  result.truncated = state.step_index >= config.horizon;
  result.collision_count = collisions;
  return result;
}

Vector per_agent_observation(const WorldState& state, int agent_index) {
  const int n = state.n_agents();
  const int m = state.n_landmarks();
  if (agent_index < 0 || agent_index >= n) {
    throw std::invalid_argument("per_agent_observation: agent index " +
                                std::to_string(agent_index) + " out of range");
  }
  Vector obs(2 * (n + m));
  obs.segment<2>(0) = state.agent_positions.col(agent_index);
  int slot = 1;
  for (int i = 0; i < n; ++i) {
    if (i == agent_index) continue;
    obs.segment<2>(2 * slot) = state.agent_positions.col(i);
    ++slot;
  }
  for (int j = 0; j < m; ++j) obs.segment<2>(2 * (n + j)) = state.landmark_positions.col(j);
  return obs;
}

WorldState state_from_observation(const Vector& observation, int n_agents) {
  if (observation.size() % 2 != 0 || observation.size() < 2 * n_agents + 2) {
    throw std::invalid_argument("state_from_observation: observation length " +
                                std::to_string(observation.size()) + " inconsistent with " +
                                std::to_string(n_agents) + " agents");
  }
  const int m = static_cast<int>(observation.size() / 2) - n_agents;
  WorldState state;
  state.agent_positions.resize(2, n_agents);
  state.landmark_positions.resize(2, m);
  for (int i = 0; i < n_agents; ++i) state.agent_positions.col(i) = observation.segment<2>(2 * i);
  for (int j = 0; j < m; ++j) {
    state.landmark_positions.col(j) = observation.segment<2>(2 * (n_agents + j));
  }
  state.step_index = 0;
  return state;
}

}  // namespace marl::env
