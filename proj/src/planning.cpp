#include "vlngame/planning.hpp"

#include "vlngame/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <tuple>

namespace vlngame {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

double wrap_deg(double d) {
    d = std::fmod(d, 360.0);
    if (d > 180.0) d -= 360.0;
    if (d <= -180.0) d += 360.0;
    return d;
}

bool is_blocked(const Grid<std::uint8_t>& blocked, Cell c) { return !blocked.in_bounds(c) || blocked[c] != 0; }

}  // namespace

DistanceField fmm_field(const Grid<std::uint8_t>& blocked, std::span<const Cell> goals, double cell_size) {
    const int w = blocked.width();
    const int h = blocked.height();
    DistanceField field;
    field.cell_size = cell_size;
    field.values = Grid<double>(w, h, kInf);

    enum : std::uint8_t { kFar = 0, kTrial = 1, kAccepted = 2 };
    Grid<std::uint8_t> state(w, h, kFar);

    using Entry = std::tuple<double, std::size_t>;  // value, row-major index
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;

    for (const auto& g : goals) {
        if (is_blocked(blocked, g)) continue;
        if (field.values[g] == 0.0) continue;
        field.values[g] = 0.0;
        field.goals.push_back(g);
        heap.emplace(0.0, field.values.index(g.x, g.y));
    }
    if (field.goals.empty()) throw GoalBlocked("all goal cells are blocked or out of bounds");
    std::sort(field.goals.begin(), field.goals.end());

    auto accepted_value = [&](int x, int y) {
        if (!state.in_bounds(x, y) || state(x, y) != kAccepted) return kInf;
        return field.values(x, y);
    };

    auto solve = [&](int x, int y) {
        const double a = std::min(accepted_value(x - 1, y), accepted_value(x + 1, y));
        const double b = std::min(accepted_value(x, y - 1), accepted_value(x, y + 1));
        double best = kInf;
        if (a < kInf || b < kInf) {
            if (a < kInf && b < kInf && std::abs(a - b) < cell_size) {
                best = 0.5 * (a + b + std::sqrt(2.0 * cell_size * cell_size - (a - b) * (a - b)));
            } else {
                best = std::min(a, b) + cell_size;
            }
        }
        const double diag = std::min(std::min(accepted_value(x - 1, y - 1), accepted_value(x + 1, y + 1)),
                                     std::min(accepted_value(x - 1, y + 1), accepted_value(x + 1, y - 1)));
        if (diag < kInf) best = std::min(best, diag + std::numbers::sqrt2 * cell_size);
        return best;
    };

    while (!heap.empty()) {
        const auto [value, idx] = heap.top();
        heap.pop();
        const Cell c = field.values.cell_at(idx);
        if (state[c] == kAccepted || value > field.values[c]) continue;
        state[c] = kAccepted;
        for (int k = 0; k < 8; ++k) {
            const Cell n{c.x + kDx8[k], c.y + kDy8[k]};
            if (is_blocked(blocked, n) || state[n] == kAccepted) continue;
            const double v = solve(n.x, n.y);
            if (v < field.values[n]) {
                field.values[n] = v;
                state[n] = kTrial;
                heap.emplace(v, field.values.index(n.x, n.y));
            }
        }
    }
    return field;
}

Path extract_path(const DistanceField& field, Cell start) {
    if (!field.reachable(start)) throw Unreachable("start cell has no finite distance to the goal");
    Path path{start};
    Cell cur = start;
    const std::size_t limit = field.values.size();
    while (field.values[cur] > 0.0) {
        Cell best = cur;
        double best_v = field.values[cur];
        for (int k = 0; k < 8; ++k) {
            const Cell n{cur.x + kDx8[k], cur.y + kDy8[k]};
            if (!field.values.in_bounds(n)) continue;
            const double v = field.values[n];
            if (v < best_v || (v == best_v && best != cur && n < best)) {
                best_v = v;
                best = n;
            }
        }
        if (best == cur) throw Unreachable("distance field has no descent direction");
        path.push_back(best);
        cur = best;
        if (path.size() > limit) throw Unreachable("descent did not terminate");
    }
    return path;
}

Cell local_goal(const Path& path, Vec2 position, double cell_size, double horizon_m) {
    Cell goal = path.front();
    for (std::size_t i = 1; i < path.size(); ++i) {
        if (distance(position, cell_center(path[i], cell_size)) > horizon_m + 1e-9) break;
        goal = path[i];
    }
    return goal;
}

Action next_action(const AgentPose& pose, Vec2 waypoint, bool at_goal, double heading_tol_deg) {
    if (at_goal) return Action::stop;
    const double bearing = std::atan2(waypoint.y - pose.y, waypoint.x - pose.x) * kRadToDeg;
    const double error = wrap_deg(bearing - pose.heading);
    if (std::abs(error) > heading_tol_deg) return error > 0.0 ? Action::turn_left : Action::turn_right;
    return Action::move_forward;
}

bool segment_clear(const Grid<std::uint8_t>& blocked, Vec2 from, Vec2 to, double cell_size) {
    const double len = distance(from, to);
    const int samples = std::max(1, static_cast<int>(std::ceil(len / (cell_size / 8.0))));
    for (int i = 0; i <= samples; ++i) {
        const double t = static_cast<double>(i) / samples;
        if (is_blocked(blocked, cell_of({from.x + t * (to.x - from.x), from.y + t * (to.y - from.y)}, cell_size))) {
            return false;
        }
    }
    return true;
}

std::optional<Vec2> progress_waypoint(const DistanceField& field, const Grid<std::uint8_t>& blocked,
                                      const AgentPose& pose, Vec2 toward) {
    const double cs = field.cell_size;
    const Cell here = cell_of(pose.position(), cs);
    const double here_v = field.at(here);
    const double goal_bearing = std::atan2(toward.y - pose.y, toward.x - pose.x) * kRadToDeg;

    auto step_ok = [&](Cell dest) {
        if (is_blocked(blocked, dest)) return false;
        const int dx = dest.x - here.x;
        const int dy = dest.y - here.y;
        if (dx != 0 && dy != 0) {
            // No squeezing between two diagonal obstacles.
            if (is_blocked(blocked, {here.x + dx, here.y}) || is_blocked(blocked, {here.x, here.y + dy})) {
                return false;
            }
        }
        return true;
    };

    struct Option {
        double value;
        double turn;
        Vec2 point;
    };
    std::optional<Option> best;
    for (int k = 0; k < 12; ++k) {
        const AgentPose probe{pose.x, pose.y, normalize_heading(k * kTurnDegrees)};
        const Vec2 p = forward_point(probe, cs);
        const Cell dest = cell_of(p, cs);
        if (dest == here || !step_ok(dest)) continue;
        const double v = field.at(dest);
        if (!(v < here_v)) continue;
        const double turn = std::abs(wrap_deg(probe.heading - goal_bearing));
        if (!best || v < best->value || (v == best->value && turn < best->turn)) best = Option{v, turn, p};
    }
    if (best) return best->point;

    // No single step leaves the cell downhill: reposition inside the cell toward
    // the lowest-valued admissible neighbour.
    std::optional<Cell> target;
    for (int k = 0; k < 8; ++k) {
        const Cell n{here.x + kDx8[k], here.y + kDy8[k]};
        if (!step_ok(n) || !(field.at(n) < here_v)) continue;
        if (!target || field.at(n) < field.at(*target) || (field.at(n) == field.at(*target) && n < *target)) {
            target = n;
        }
    }
    if (!target) return std::nullopt;
    const Vec2 tc = cell_center(*target, cs);
    const double d0 = distance(pose.position(), tc);
    std::optional<std::pair<double, Vec2>> inner;
    for (int k = 0; k < 12; ++k) {
        const AgentPose probe{pose.x, pose.y, normalize_heading(k * kTurnDegrees)};
        const Vec2 p = forward_point(probe, cs);
        if (cell_of(p, cs) != here) continue;
        const double d = distance(p, tc);
        if (d < d0 && (!inner || d < inner->first)) inner = std::make_pair(d, p);
    }
    if (inner) return inner->second;
    return std::nullopt;
}

}  // namespace vlngame
