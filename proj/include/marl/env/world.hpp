#pragma once

#include "marl/common.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace marl::env {

/// Cooperative navigation world: N agents and N landmarks on the square
/// [-world_half_extent, +world_half_extent]^2. Agents move by a fixed
/// displacement per action (kinematic point masses, no velocities); this is
/// an intentional simplification relative to force-based particle worlds.
struct WorldConfig {
  int n_agents = 3;
  int n_landmarks = 3;
  Scalar world_half_extent = 1.0;
  Scalar step_size = 0.1;
  Scalar collision_radius = 0.1;
  Scalar collision_penalty = 1.0;  // per colliding agent pair, per step
  int horizon = 25;
  uint64_t seed = 0;

  bool operator==(const WorldConfig&) const = default;
};

/// Throws ConfigError if any field violates its range.
void validate(const WorldConfig& config);

struct WorldState {
  Matrix2X agent_positions;     // 2 x n_agents
  Matrix2X landmark_positions;  // 2 x n_landmarks
  int step_index = 0;

  int n_agents() const { return static_cast<int>(agent_positions.cols()); }
  int n_landmarks() const { return static_cast<int>(landmark_positions.cols()); }
};

struct StepResult {
  Vector next_observation;
  Scalar reward = 0.0;
  bool terminated = false;  // never set by this world; episodes end by truncation
  bool truncated = false;
  int collision_count = 0;  // agent pairs closer than collision_radius
};

/// Flat observation [a1x, a1y, ..., l1x, l1y, ...] of length
/// 2*n_agents + 2*n_landmarks.
Vector joint_observation(const WorldState& state);

/// Samples agent then landmark positions i.i.d. uniform over the square,
/// keyed by (config.seed, episode_seed). Same key, same state.
std::pair<WorldState, Vector> reset(const WorldConfig& config, uint64_t episode_seed);

/// Advances the world one step in place. Actions: 0 nothing, 1 left (-x),
/// 2 right (+x), 3 down (-y), 4 up (+y); positions clamp to the square.
/// Reward is the shared team scalar
///   -sum_landmarks min_agents dist - collision_penalty * colliding_pairs.
/// Throws std::invalid_argument on a wrong action count or out-of-range
/// action; callers wanting lenient inputs must sanitize upstream.
StepResult step(const WorldConfig& config, WorldState& state, std::span<const int> actions);

/// Per-agent view: [own position, other agents in index order, landmarks].
/// Same length as the joint observation.
Vector per_agent_observation(const WorldState& state, int agent_index);

/// Rebuilds a state from a flat observation (the observation is lossless).
/// step_index is not recoverable and is left at 0.
WorldState state_from_observation(const Vector& observation, int n_agents);

}  // namespace marl::env
