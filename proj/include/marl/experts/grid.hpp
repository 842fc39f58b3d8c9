#pragma once

#include "marl/common.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace marl::experts {

struct Cell {
  int x = 0;
  int y = 0;

  bool operator==(const Cell&) const = default;
};

/// Uniform grid laid over the world square [-bounds, +bounds]^2. `blocked`
/// marks impassable cells; an empty predicate means an open grid.
struct GridSpec {
  int resolution = 20;  // cells per axis
  Scalar bounds = 1.0;
  std::function<bool(Cell)> blocked;

  bool in_bounds(Cell c) const {
    return c.x >= 0 && c.x < resolution && c.y >= 0 && c.y < resolution;
  }
  bool is_blocked(Cell c) const { return blocked && blocked(c); }
};

void validate(const GridSpec& grid);

/// Nearest cell to a world position (positions outside the square clamp to
/// the border cells).
Cell world_to_cell(const GridSpec& grid, const Vector2& position);
/// Center of a cell in world coordinates.
Vector2 cell_to_world(const GridSpec& grid, Cell cell);

/// Shortest 4-connected path with unit step cost and Manhattan heuristic.
/// Ties are broken by neighbor expansion order (left, right, down, up), then
/// first-in-first-out among equal f-scores. Returns the start-to-goal cell
/// sequence (length 1 when start == goal), or nullopt when unreachable.
std::optional<std::vector<Cell>> a_star(const GridSpec& grid, Cell start, Cell goal);

}  // namespace marl::experts
