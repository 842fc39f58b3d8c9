#include "marl/experts/expert.hpp"

#include <stdexcept>

namespace marl::experts {

std::string to_string(ExpertSource source) {
  switch (source) {
    case ExpertSource::a_star: return "a-star";
    case ExpertSource::llm: return "llm";
    case ExpertSource::fallback: return "fallback";
  }
  throw std::logic_error("unknown ExpertSource");
}

namespace {

int first_step_action(const std::vector<Cell>& path) {
  if (path.size() < 2) return 0;
  const int dx = path[1].x - path[0].x;
  const int dy = path[1].y - path[0].y;
  if (dx == -1) return 1;  // left
  if (dx == 1) return 2;   // right
  if (dy == -1) return 3;  // down
  if (dy == 1) return 4;   // up
  throw std::logic_error("a_star returned a non-adjacent step");
}

}  // namespace

ExpertPlan a_star_plan(const env::WorldState& state, const GridSpec& grid) {
  ExpertPlan plan;
  plan.source = ExpertSource::a_star;
  plan.actions.resize(state.n_agents(), 0);
  for (int a = 0; a < state.n_agents(); ++a) {
    const Vector2 pos = state.agent_positions.col(a);
    int nearest = 0;
    Scalar best = (state.landmark_positions.col(0) - pos).norm();
    for (int l = 1; l < state.n_landmarks(); ++l) {
      const Scalar d = (state.landmark_positions.col(l) - pos).norm();
      if (d < best) {
        best = d;
        nearest = l;
      }
    }
    const Cell start = world_to_cell(grid, pos);
    const Cell goal = world_to_cell(grid, state.landmark_positions.col(nearest));
    if (start == goal) continue;  // already there: action 0
    const auto path = a_star(grid, start, goal);
    if (path) plan.actions[a] = first_step_action(*path);
  }
  plan.valid = true;
  return plan;
}

}  // namespace marl::experts
