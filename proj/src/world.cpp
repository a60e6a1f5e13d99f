#include "vlngame/world.hpp"

#include "vlngame/errors.hpp"
#include "vlngame/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <unordered_set>

namespace vlngame {

namespace {

using nlohmann::json;

constexpr double kDegToRad = std::numbers::pi / 180.0;

template <typename T>
T require(const json& doc, const char* key, const char* context) {
    if (!doc.is_object() || !doc.contains(key)) {
        throw MalformedScene(std::string(context) + ": missing key '" + key + "'");
    }
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception& e) {
        throw MalformedScene(std::string(context) + ": bad value for '" + key + "': " + e.what());
    }
}

Cell parse_cell(const json& v, const char* context) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
        throw MalformedScene(std::string(context) + ": cells must be [x, y] integer pairs");
    }
    return {v[0].get<int>(), v[1].get<int>()};
}

json dump_cells(const std::vector<Cell>& cells) {
    json out = json::array();
    for (const auto& c : cells) out.push_back({c.x, c.y});
    return out;
}

// Exact unit direction for axis-aligned headings so forward moves stay on cell centers.
Vec2 heading_direction(double heading) {
    const double h = normalize_heading(heading);
    if (h == 0.0) return {1.0, 0.0};
    if (h == 90.0) return {0.0, 1.0};
    if (h == 180.0) return {-1.0, 0.0};
    if (h == 270.0) return {0.0, -1.0};
    return {std::cos(h * kDegToRad), std::sin(h * kDegToRad)};
}

double angle_diff_deg(double a, double b) {
    double d = std::fmod(a - b, 360.0);
    if (d > 180.0) d -= 360.0;
    if (d < -180.0) d += 360.0;
    return d;
}

// Cells crossed by the segment origin -> target, excluding the origin and target cells.
// Depends only on geometry, never on occupancy.
bool line_of_sight(const GridScene& scene, Vec2 origin, Cell target) {
    const Vec2 goal = cell_center(target, scene.cell_size);
    const Cell start = cell_of(origin, scene.cell_size);
    const double len = distance(origin, goal);
    const int samples = static_cast<int>(std::ceil(len / (scene.cell_size / 8.0)));
    for (int i = 1; i < samples; ++i) {
        const double t = static_cast<double>(i) / samples;
        const Cell c = cell_of({origin.x + t * (goal.x - origin.x), origin.y + t * (goal.y - origin.y)},
                               scene.cell_size);
        if (c == start || c == target) continue;
        if (!scene.in_bounds(c) || scene.occupancy[c] == Occupancy::obstacle) return false;
    }
    return true;
}

}  // namespace

std::string_view to_string(Action a) {
    switch (a) {
        case Action::move_forward: return "move_forward";
        case Action::turn_left: return "turn_left";
        case Action::turn_right: return "turn_right";
        case Action::look_up: return "look_up";
        case Action::look_down: return "look_down";
        case Action::stop: return "stop";
    }
    return "unknown";
}

const SceneObject* GridScene::find_object(int id) const {
    for (const auto& o : objects) {
        if (o.id == id) return &o;
    }
    return nullptr;
}

std::vector<std::string> GridScene::categories() const {
    std::vector<std::string> out;
    for (const auto& o : objects) out.push_back(o.category);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

SceneObject make_scene_object(int id, std::string category, std::vector<std::string> attributes,
                              std::vector<Cell> footprint, std::uint64_t embedding_seed, double cell_size,
                              int embedding_dim) {
    SceneObject obj;
    obj.id = id;
    obj.category = std::move(category);
    obj.attributes = std::move(attributes);
    std::sort(footprint.begin(), footprint.end());
    footprint.erase(std::unique(footprint.begin(), footprint.end()), footprint.end());
    obj.footprint = std::move(footprint);
    obj.embedding_seed = embedding_seed;
    if (!obj.footprint.empty()) {
        Vec2 sum;
        for (const auto& c : obj.footprint) {
            const Vec2 p = cell_center(c, cell_size);
            sum.x += p.x;
            sum.y += p.y;
        }
        const double n = static_cast<double>(obj.footprint.size());
        obj.centroid = {sum.x / n, sum.y / n};
    }
    obj.true_embedding = instance_embedding(obj.category, obj.attributes, embedding_seed, embedding_dim);
    return obj;
}

void validate_scene(const GridScene& scene) {
    if (scene.width <= 0 || scene.height <= 0) throw MalformedScene("scene dimensions must be positive");
    if (!(scene.cell_size > 0.0)) throw MalformedScene("cell_size must be positive");
    if (scene.embedding_dim < 2) throw MalformedScene("embedding_dim must be at least 2");
    std::unordered_set<int> ids;
    for (const auto& o : scene.objects) {
        if (!ids.insert(o.id).second) throw MalformedScene("duplicate object id " + std::to_string(o.id));
        if (o.footprint.empty()) throw MalformedScene("object " + std::to_string(o.id) + " has empty footprint");
        if (o.category.empty()) throw MalformedScene("object " + std::to_string(o.id) + " has no category");
        for (const auto& c : o.footprint) {
            if (!scene.in_bounds(c)) {
                throw InvalidPlacement("object " + std::to_string(o.id) + " extends outside the scene");
            }
            if (scene.occupancy[c] == Occupancy::obstacle) {
                throw InvalidPlacement("object " + std::to_string(o.id) + " overlaps an obstacle at [" +
                                       std::to_string(c.x) + ", " + std::to_string(c.y) + "]");
            }
        }
        if (std::abs(norm(o.true_embedding) - 1.0) > 1e-9) {
            throw MalformedScene("object " + std::to_string(o.id) + " embedding is not unit norm");
        }
    }
}

GridScene scene_from_json(const json& doc) {
    if (!doc.is_object()) throw MalformedScene("scene document must be an object");
    GridScene scene;
    scene.width = require<int>(doc, "width", "scene");
    scene.height = require<int>(doc, "height", "scene");
    scene.cell_size = doc.contains("cell_size") ? require<double>(doc, "cell_size", "scene") : kDefaultCellSize;
    scene.embedding_dim =
        doc.contains("embedding_dim") ? require<int>(doc, "embedding_dim", "scene") : kDefaultEmbeddingDim;
    if (scene.width <= 0 || scene.height <= 0) throw MalformedScene("scene dimensions must be positive");
    if (scene.embedding_dim < 2) throw MalformedScene("embedding_dim must be at least 2");
    scene.occupancy = Grid<Occupancy>(scene.width, scene.height, Occupancy::free);

    if (doc.contains("obstacles")) {
        const auto& obs = doc.at("obstacles");
        if (!obs.is_array()) throw MalformedScene("scene: 'obstacles' must be an array");
        for (const auto& v : obs) {
            const Cell c = parse_cell(v, "obstacles");
            if (!scene.in_bounds(c)) throw MalformedScene("obstacle outside the scene bounds");
            scene.occupancy[c] = Occupancy::obstacle;
        }
    }

    if (!doc.contains("objects") || !doc.at("objects").is_array()) {
        throw MalformedScene("scene: 'objects' must be an array");
    }
    for (const auto& o : doc.at("objects")) {
        const int id = require<int>(o, "id", "object");
        auto category = require<std::string>(o, "category", "object");
        std::vector<std::string> attributes;
        if (o.contains("attributes")) attributes = require<std::vector<std::string>>(o, "attributes", "object");
        if (!o.contains("footprint") || !o.at("footprint").is_array()) {
            throw MalformedScene("object: 'footprint' must be an array");
        }
        std::vector<Cell> footprint;
        for (const auto& v : o.at("footprint")) footprint.push_back(parse_cell(v, "footprint"));
        const auto seed = o.contains("embedding_seed") ? require<std::uint64_t>(o, "embedding_seed", "object")
                                                       : static_cast<std::uint64_t>(id);
        scene.objects.push_back(make_scene_object(id, std::move(category), std::move(attributes),
                                                  std::move(footprint), seed, scene.cell_size,
                                                  scene.embedding_dim));
    }
    validate_scene(scene);
    return scene;
}

json scene_to_json(const GridScene& scene) {
    json doc;
    doc["width"] = scene.width;
    doc["height"] = scene.height;
    doc["cell_size"] = scene.cell_size;
    if (scene.embedding_dim != kDefaultEmbeddingDim) doc["embedding_dim"] = scene.embedding_dim;
    std::vector<Cell> obstacles;
    for (std::size_t i = 0; i < scene.occupancy.size(); ++i) {
        if (scene.occupancy.data()[i] == Occupancy::obstacle) obstacles.push_back(scene.occupancy.cell_at(i));
    }
    doc["obstacles"] = dump_cells(obstacles);
    doc["objects"] = json::array();
    for (const auto& o : scene.objects) {
        doc["objects"].push_back({{"id", o.id},
                                  {"category", o.category},
                                  {"attributes", o.attributes},
                                  {"footprint", dump_cells(o.footprint)},
                                  {"embedding_seed", o.embedding_seed}});
    }
    return doc;
}

GridScene load_scene(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MalformedScene("cannot open scene file " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw MalformedScene("scene file " + path.string() + " is not valid JSON: " + e.what());
    }
    return scene_from_json(doc);
}

Query query_from_json(const json& doc) {
    Query q;
    q.raw_text = require<std::string>(doc, "raw_text", "query");
    const auto& goal = doc.contains("main_goal") ? doc.at("main_goal") : json();
    q.main_goal.category = require<std::string>(goal, "category", "query.main_goal");
    if (goal.contains("attributes")) {
        q.main_goal.attributes = require<std::vector<std::string>>(goal, "attributes", "query.main_goal");
    }
    if (doc.contains("relations")) {
        for (const auto& r : doc.at("relations")) {
            Relation rel;
            rel.relation = require<std::string>(r, "relation", "relation");
            rel.references = require<std::vector<std::string>>(r, "references", "relation");
            const bool known = std::find(std::begin(kRelationTokens), std::end(kRelationTokens), rel.relation) !=
                               std::end(kRelationTokens);
            if (!known) throw MalformedScene("unknown relation token '" + rel.relation + "'");
            const std::size_t want = rel.relation == "between" ? 2 : 1;
            if (rel.references.size() != want) {
                throw MalformedScene("relation '" + rel.relation + "' expects " + std::to_string(want) +
                                     " reference(s)");
            }
            q.relations.push_back(std::move(rel));
        }
    }
    if (doc.contains("goal_object_ids")) {
        for (int id : require<std::vector<int>>(doc, "goal_object_ids", "query")) q.goal_object_ids.insert(id);
    }
    return q;
}

json query_to_json(const Query& q) {
    json rels = json::array();
    for (const auto& r : q.relations) rels.push_back({{"relation", r.relation}, {"references", r.references}});
    return {{"raw_text", q.raw_text},
            {"main_goal", {{"category", q.main_goal.category}, {"attributes", q.main_goal.attributes}}},
            {"relations", rels},
            {"goal_object_ids", std::vector<int>(q.goal_object_ids.begin(), q.goal_object_ids.end())}};
}

Episode episode_from_json(const json& doc, std::shared_ptr<const GridScene> scene) {
    Episode ep;
    ep.scene = std::move(scene);
    if (doc.contains("id")) {
        ep.id = doc.at("id").is_string() ? doc.at("id").get<std::string>() : doc.at("id").dump();
    }
    const auto& start = doc.contains("start") ? doc.at("start") : json();
    ep.start.x = require<double>(start, "x", "episode.start");
    ep.start.y = require<double>(start, "y", "episode.start");
    ep.start.heading = normalize_heading(start.contains("heading") ? require<double>(start, "heading", "episode.start")
                                                                   : 0.0);
    if (!doc.contains("query")) throw MalformedScene("episode: missing key 'query'");
    ep.query = query_from_json(doc.at("query"));
    if (doc.contains("success_radius")) ep.success_radius = require<double>(doc, "success_radius", "episode");
    if (doc.contains("max_steps")) ep.max_steps = require<int>(doc, "max_steps", "episode");
    if (ep.scene) {
        if (!ep.scene->is_free(cell_of(ep.start.position(), ep.scene->cell_size))) {
            throw InvalidPlacement("episode start pose is not on a free cell");
        }
        for (int id : ep.query.goal_object_ids) {
            if (!ep.scene->find_object(id)) {
                throw MalformedScene("goal object " + std::to_string(id) + " not present in scene");
            }
        }
    }
    return ep;
}

json episode_to_json(const Episode& ep, const std::string& scene_ref) {
    json doc = {{"scene", scene_ref},
                {"start", {{"x", ep.start.x}, {"y", ep.start.y}, {"heading", ep.start.heading}}},
                {"query", query_to_json(ep.query)}};
    if (!ep.id.empty()) doc["id"] = ep.id;
    if (ep.success_radius != 1.0) doc["success_radius"] = ep.success_radius;
    if (ep.max_steps != kDefaultMaxSteps) doc["max_steps"] = ep.max_steps;
    return doc;
}

Episode load_episode(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MalformedScene("cannot open episode file " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw MalformedScene("episode file " + path.string() + " is not valid JSON: " + e.what());
    }
    const auto scene_ref = require<std::string>(doc, "scene", "episode");
    auto scene_path = path.parent_path() / scene_ref;
    auto scene = std::make_shared<const GridScene>(load_scene(scene_path));
    Episode ep = episode_from_json(doc, std::move(scene));
    ep.scene_path = scene_path;
    if (ep.id.empty()) ep.id = path.stem().string();
    return ep;
}

double normalize_heading(double degrees) {
    double h = std::fmod(degrees, 360.0);
    if (h < 0.0) h += 360.0;
    if (h >= 360.0) h -= 360.0;
    return h;
}

Vec2 forward_point(const AgentPose& pose, double cell_size) {
    const Vec2 d = heading_direction(pose.heading);
    return {pose.x + cell_size * d.x, pose.y + cell_size * d.y};
}

AgentPose step(const GridScene& scene, const AgentPose& pose, Action action) {
    AgentPose next = pose;
    switch (action) {
        case Action::turn_left: next.heading = normalize_heading(pose.heading + kTurnDegrees); break;
        case Action::turn_right: next.heading = normalize_heading(pose.heading - kTurnDegrees); break;
        case Action::move_forward: {
            const Vec2 target = forward_point(pose, scene.cell_size);
            if (scene.is_free(cell_of(target, scene.cell_size))) {
                next.x = target.x;
                next.y = target.y;
            }
            break;
        }
        case Action::look_up:
        case Action::look_down:
        case Action::stop: break;
    }
    return next;
}

Embedding rotate_descriptor(const Embedding& v, double angle, std::uint64_t seed) {
    if (angle == 0.0) return v;
    Rng rng(seed);
    Embedding u(v.size());
    const double vn = norm(v);
    // Gram-Schmidt a random direction against v.
    for (int attempt = 0; attempt < 8; ++attempt) {
        for (auto& x : u) x = rng.normal();
        const double proj = dot(u, v) / (vn * vn);
        for (std::size_t i = 0; i < u.size(); ++i) u[i] -= proj * v[i];
        if (norm(u) > 1e-12) break;
    }
    normalize_in_place(u);
    Embedding out(v.size());
    const double c = std::cos(angle);
    const double s = std::sin(angle) * vn;
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = c * v[i] + s * u[i];
    return out;
}

Observation observe(const GridScene& scene, const AgentPose& pose, const SensorConfig& sensor,
                    const SensorNoise& noise) {
    Observation obs;
    const Vec2 origin = pose.position();
    const Cell here = cell_of(origin, scene.cell_size);
    const bool full_circle = sensor.fov_deg >= 360.0;
    const double half_fov = 0.5 * sensor.fov_deg;
    const int reach = static_cast<int>(std::ceil(sensor.range_m / scene.cell_size)) + 1;

    Grid<std::uint8_t> visible(scene.width, scene.height, 0);
    for (int y = std::max(0, here.y - reach); y <= std::min(scene.height - 1, here.y + reach); ++y) {
        for (int x = std::max(0, here.x - reach); x <= std::min(scene.width - 1, here.x + reach); ++x) {
            const Cell c{x, y};
            bool seen = false;
            if (c == here) {
                seen = true;
            } else {
                const Vec2 p = cell_center(c, scene.cell_size);
                const double d = distance(origin, p);
                if (d <= sensor.range_m + 1e-9) {
                    const double bearing = std::atan2(p.y - origin.y, p.x - origin.x) / kDegToRad;
                    const bool in_fov =
                        full_circle || std::abs(angle_diff_deg(bearing, pose.heading)) <= half_fov + 1e-9;
                    seen = in_fov && line_of_sight(scene, origin, c);
                }
            }
            if (seen) {
                visible(x, y) = 1;
                obs.visible_cells.push_back(c);
                if (scene.occupancy[c] == Occupancy::obstacle) obs.obstacle_cells.push_back(c);
            }
        }
    }

    for (const auto& obj : scene.objects) {
        Detection det;
        for (const auto& c : obj.footprint) {
            if (visible[c]) det.footprint.push_back(c);
        }
        if (det.footprint.empty()) continue;
        det.object_id = obj.id;
        det.distance = distance(origin, obj.centroid);
        if (noise.magnitude == 0.0) {
            det.descriptor = obj.true_embedding;
        } else {
            const std::uint64_t s = mix_seed(noise.seed, static_cast<std::uint64_t>(obj.id));
            Rng rng(s);
            const double angle = noise.magnitude * det.distance * rng.normal();
            det.descriptor = rotate_descriptor(obj.true_embedding, angle, mix_seed(s, 1));
        }
        obs.detections.push_back(std::move(det));
    }
    return obs;
}

std::optional<double> distance_to_goal(const GridScene& scene, const Query& query, Vec2 position) {
    std::optional<double> best;
    for (int id : query.goal_object_ids) {
        const auto* obj = scene.find_object(id);
        if (!obj) continue;
        const double d = distance(position, obj->centroid);
        if (!best || d < *best) best = d;
    }
    return best;
}

bool check_success(const AgentPose& pose, const Episode& episode) {
    const auto d = distance_to_goal(*episode.scene, episode.query, pose.position());
    return d && *d <= episode.success_radius;
}

}  // namespace vlngame
