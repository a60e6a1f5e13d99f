#pragma once

#include "vlngame/grid.hpp"
#include "vlngame/world.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace vlngame {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct PlanningConfig {
    double horizon_m = 2.0;
    double heading_tol_deg = 15.0;
};

// Geodesic distance (meters) to the goal set; kInf where unreachable.
struct DistanceField {
    Grid<double> values;
    std::vector<Cell> goals;
    double cell_size = kDefaultCellSize;

    bool reachable(Cell c) const { return values.in_bounds(c) && values[c] < kInf; }
    double at(Cell c) const { return values.in_bounds(c) ? values[c] : kInf; }
};

using Path = std::vector<Cell>;

// Fast marching solve of |grad u| = 1 on free cells (blocked != 0 is an obstacle).
// Axis neighbours use the first-order upwind two-point update; diagonal
// neighbours contribute a one-point update of length sqrt(2)*h so that cells
// connected only through a diagonal gap are still reached.
// Throws GoalBlocked when every goal lies on an obstacle or outside the grid.
DistanceField fmm_field(const Grid<std::uint8_t>& blocked, std::span<const Cell> goals, double cell_size);

// Steepest descent over the 8-neighbourhood down to a goal cell. Throws Unreachable.
Path extract_path(const DistanceField& field, Cell start);

// Farthest cell of the path prefix that stays within `horizon_m` of `position`.
Cell local_goal(const Path& path, Vec2 position, double cell_size, double horizon_m);

// Stop at goal; otherwise turn toward the waypoint when the heading error
// exceeds the tolerance (positive error = counter-clockwise = turn_left), else move forward.
Action next_action(const AgentPose& pose, Vec2 waypoint, bool at_goal, double heading_tol_deg = 15.0);

// True when the straight segment between two points crosses no blocked cell.
bool segment_clear(const Grid<std::uint8_t>& blocked, Vec2 from, Vec2 to, double cell_size);

// Point the agent should head for next: the forward-step destination, among
// the twelve reachable headings, that makes the most progress down the field.
// Headings are ranked by field value at the destination, then by angular
// closeness to `toward`. nullopt when no heading makes progress.
std::optional<Vec2> progress_waypoint(const DistanceField& field, const Grid<std::uint8_t>& blocked,
                                      const AgentPose& pose, Vec2 toward);

}  // namespace vlngame
