#include "marl/experts/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <stdexcept>

namespace marl::experts {

void validate(const GridSpec& grid) {
  if (grid.resolution < 2) throw ConfigError("grid resolution must be >= 2");
  if (!(grid.bounds > 0)) throw ConfigError("grid bounds must be > 0");
}

Cell world_to_cell(const GridSpec& grid, const Vector2& position) {
  const Scalar cell_width = 2 * grid.bounds / grid.resolution;
  auto snap = [&](Scalar v) {
    const int i = static_cast<int>(std::floor((v + grid.bounds) / cell_width));
    return std::clamp(i, 0, grid.resolution - 1);
  };
  return {snap(position.x()), snap(position.y())};
}

Vector2 cell_to_world(const GridSpec& grid, Cell cell) {
  const Scalar cell_width = 2 * grid.bounds / grid.resolution;
  return {-grid.bounds + (cell.x + 0.5) * cell_width, -grid.bounds + (cell.y + 0.5) * cell_width};
}

std::optional<std::vector<Cell>> a_star(const GridSpec& grid, Cell start, Cell goal) {
  validate(grid);
  if (!grid.in_bounds(start) || !grid.in_bounds(goal)) {
    throw std::invalid_argument("a_star: start or goal out of bounds");
  }
  if (grid.is_blocked(start) || grid.is_blocked(goal)) {
    throw std::invalid_argument("a_star: start or goal blocked");
  }

  const int res = grid.resolution;
  auto index = [res](Cell c) { return c.y * res + c.x; };
  auto manhattan = [goal](Cell c) { return std::abs(c.x - goal.x) + std::abs(c.y - goal.y); };

  struct Node {
    int f;
    uint64_t seq;  // insertion order; FIFO among equal f
    Cell cell;
    int g;
  };
  auto worse = [](const Node& a, const Node& b) {
    return a.f != b.f ? a.f > b.f : a.seq > b.seq;
  };
  std::priority_queue<Node, std::vector<Node>, decltype(worse)> open(worse);

  constexpr int kUnvisited = -1;
  std::vector<int> best_g(static_cast<size_t>(res) * res, kUnvisited);
  std::vector<int> came_from(static_cast<size_t>(res) * res, kUnvisited);

  uint64_t seq = 0;
  best_g[index(start)] = 0;
  open.push({manhattan(start), seq++, start, 0});

  // Matches the env action axes: left, right, down, up.
  constexpr int dx[4] = {-1, 1, 0, 0};
  constexpr int dy[4] = {0, 0, -1, 1};

  while (!open.empty()) {
    const Node node = open.top();
    open.pop();
    if (node.g > best_g[index(node.cell)]) continue;  // superseded entry
    if (node.cell == goal) {
      std::vector<Cell> path;
      Cell c = goal;
      while (!(c == start)) {
        path.push_back(c);
        const int p = came_from[index(c)];
        c = {p % res, p / res};
      }
      path.push_back(start);
      std::reverse(path.begin(), path.end());
      return path;
    }
    for (int d = 0; d < 4; ++d) {
      const Cell next{node.cell.x + dx[d], node.cell.y + dy[d]};
      if (!grid.in_bounds(next) || grid.is_blocked(next)) continue;
      const int g = node.g + 1;
      int& recorded = best_g[index(next)];
      if (recorded != kUnvisited && recorded <= g) continue;
      recorded = g;
      came_from[index(next)] = index(node.cell);
      open.push({g + manhattan(next), seq++, next, g});
    }
  }
  return std::nullopt;
}

}  // namespace marl::experts
