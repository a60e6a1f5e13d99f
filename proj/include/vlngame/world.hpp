#pragma once

#include "vlngame/grid.hpp"
#include "vlngame/semantics.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace vlngame {

// Ground-truth 2D world, agent kinematics and the simulated sensor.

enum class Action { move_forward, turn_left, turn_right, look_up, look_down, stop };

std::string_view to_string(Action a);

inline constexpr double kDefaultCellSize = 0.25;
inline constexpr double kTurnDegrees = 30.0;
inline constexpr int kDefaultMaxSteps = 500;

struct SceneObject {
    int id = 0;
    std::string category;
    std::vector<std::string> attributes;
    std::vector<Cell> footprint;  // sorted row-major, unique
    Vec2 centroid;                // meters
    Embedding true_embedding;     // unit norm
    std::uint64_t embedding_seed = 0;
};

enum class Occupancy : std::uint8_t { free = 0, obstacle = 1 };

struct GridScene {
    int width = 0;
    int height = 0;
    double cell_size = kDefaultCellSize;
    int embedding_dim = kDefaultEmbeddingDim;
    Grid<Occupancy> occupancy;
    std::vector<SceneObject> objects;

    bool in_bounds(Cell c) const { return occupancy.in_bounds(c); }
    bool is_free(Cell c) const { return in_bounds(c) && occupancy[c] == Occupancy::free; }
    const SceneObject* find_object(int id) const;
    // Distinct categories present, sorted.
    std::vector<std::string> categories() const;
};

// Builds the object (footprint ordering, centroid, embedding) from its file fields.
SceneObject make_scene_object(int id, std::string category, std::vector<std::string> attributes,
                              std::vector<Cell> footprint, std::uint64_t embedding_seed, double cell_size,
                              int embedding_dim);

// Throws MalformedScene or InvalidPlacement.
void validate_scene(const GridScene& scene);

GridScene scene_from_json(const nlohmann::json& doc);
nlohmann::json scene_to_json(const GridScene& scene);
GridScene load_scene(const std::filesystem::path& path);

struct GoalSpec {
    std::string category;
    std::vector<std::string> attributes;
};

inline constexpr std::string_view kRelationTokens[] = {"near",   "between", "left_of",
                                                       "right_of", "in_front_of", "behind"};

struct Relation {
    std::string relation;
    std::vector<std::string> references;  // reference categories
};

struct Query {
    std::string raw_text;
    GoalSpec main_goal;
    std::vector<Relation> relations;
    std::set<int> goal_object_ids;

    bool has_relations() const { return !relations.empty(); }
};

struct AgentPose {
    double x = 0.0;  // meters
    double y = 0.0;
    double heading = 0.0;  // degrees in [0, 360), counter-clockwise from +x

    Vec2 position() const { return {x, y}; }
    friend bool operator==(const AgentPose&, const AgentPose&) = default;
};

struct SensorConfig {
    double fov_deg = 90.0;
    double range_m = 5.0;
};

// View-descriptor noise: rotation angle (radians) per meter of viewing distance.
struct SensorNoise {
    double magnitude = 0.0;
    std::uint64_t seed = 0;
};

struct Detection {
    int object_id = 0;  // ground truth; not consumed by the agent's policy
    Embedding descriptor;
    std::vector<Cell> footprint;  // visible part, sorted
    double distance = 0.0;
};

struct Observation {
    std::vector<Cell> visible_cells;   // sorted row-major
    std::vector<Cell> obstacle_cells;  // visible cells that are obstacles, sorted
    std::vector<Detection> detections;
};

struct Episode {
    std::string id;
    std::shared_ptr<const GridScene> scene;
    std::filesystem::path scene_path;
    Query query;
    AgentPose start;
    double success_radius = 1.0;
    int max_steps = kDefaultMaxSteps;
};

Query query_from_json(const nlohmann::json& doc);
nlohmann::json query_to_json(const Query& query);

// Resolves the scene path relative to the episode file.
Episode load_episode(const std::filesystem::path& path);
Episode episode_from_json(const nlohmann::json& doc, std::shared_ptr<const GridScene> scene);
nlohmann::json episode_to_json(const Episode& episode, const std::string& scene_ref);

double normalize_heading(double degrees);

// Point reached by a forward move of one cell length along the heading.
Vec2 forward_point(const AgentPose& pose, double cell_size);

AgentPose step(const GridScene& scene, const AgentPose& pose, Action action);

Observation observe(const GridScene& scene, const AgentPose& pose, const SensorConfig& sensor = {},
                    const SensorNoise& noise = {});

// Rotates `v` by `angle` radians in the plane spanned by `v` and a random
// direction orthogonal to it.
Embedding rotate_descriptor(const Embedding& v, double angle, std::uint64_t seed);

// Euclidean distance from pose to the nearest goal centroid; nullopt without goals.
std::optional<double> distance_to_goal(const GridScene& scene, const Query& query, Vec2 position);

bool check_success(const AgentPose& pose, const Episode& episode);

}  // namespace vlngame
