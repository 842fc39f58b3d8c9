#pragma once

#include "marl/env/world.hpp"
#include "marl/experts/grid.hpp"

#include <optional>
#include <string>
#include <vector>

namespace marl::experts {

enum class ExpertSource { a_star, llm, fallback };

std::string to_string(ExpertSource source);  // "a-star" | "llm" | "fallback"

/// A joint action recommendation for the current state. valid == true
/// guarantees actions has one in-range entry per agent.
struct ExpertPlan {
  std::vector<int> actions;
  ExpertSource source = ExpertSource::a_star;
  bool valid = false;
  std::optional<std::string> raw_response;  // llm only
};

class Expert {
 public:
  virtual ~Expert() = default;
  virtual ExpertPlan plan(const env::WorldState& state) = 0;
  virtual std::string name() const = 0;
};

/// Single-agent shortest-path planner: each agent independently heads for
/// its nearest landmark (ties to the lowest landmark index) along an A* path
/// over the grid; there is deliberately no inter-agent conflict resolution.
ExpertPlan a_star_plan(const env::WorldState& state, const GridSpec& grid);

class AStarExpert final : public Expert {
 public:
  explicit AStarExpert(GridSpec grid) : grid_(std::move(grid)) { validate(grid_); }

  ExpertPlan plan(const env::WorldState& state) override { return a_star_plan(state, grid_); }
  std::string name() const override { return "a-star"; }
  const GridSpec& grid() const { return grid_; }

 private:
  GridSpec grid_;
};

}  // namespace marl::experts
