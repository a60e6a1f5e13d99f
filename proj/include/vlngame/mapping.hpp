#pragma once

#include "vlngame/grid.hpp"
#include "vlngame/semantics.hpp"
#include "vlngame/world.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vlngame {

struct MappingConfig {
    double w_geo = 0.5;
    double w_sem = 0.5;
    double merge_threshold = 0.7;
    int dilation_radius = 2;  // cells
    int min_frontier_size = 4;
};

enum class MapObjectStatus { active, candidate, rejected };

struct MapObject {
    static constexpr double kNoView = 1e300;

    int map_id = 0;
    std::vector<Cell> footprint;  // union over views, sorted
    Embedding embedding;          // normalized running mean of view descriptors
    Embedding descriptor_sum;
    int view_count = 0;
    MapObjectStatus status = MapObjectStatus::active;
    std::optional<double> query_similarity;  // (cos+1)/2 against the current query
    Embedding closest_view;  // descriptor of the nearest view so far
    double closest_distance = kNoView;
    // Ground-truth provenance (object id -> number of merged detections); used
    // only for scoring and synthetic oracles.
    std::map<int, int> source_votes;

    Vec2 centroid(double cell_size) const;
    std::optional<int> majority_source() const;
};

struct ObjectCentricMap {
    std::vector<MapObject> objects;
    int next_id = 0;

    const MapObject* find(int map_id) const;
    MapObject* find(int map_id);
};

double footprint_iou(const std::vector<Cell>& a, const std::vector<Cell>& b);

// Association score between a detection and an existing map object.
double association_score(const Detection& det, const MapObject& obj, const MappingConfig& cfg);

// Merges each detection into the best-scoring object when the score reaches
// the threshold; otherwise instantiates a new object.
void integrate(ObjectCentricMap& map, const Observation& obs, const AgentPose& pose, const MappingConfig& cfg = {});

// Refreshes every object's query_similarity.
void refresh_similarity(ObjectCentricMap& map, const Embedding& query_embedding);

struct ExplorationMap {
    Grid<std::uint8_t> obstacle;
    Grid<std::uint8_t> explored;

    ExplorationMap() = default;
    ExplorationMap(int width, int height) : obstacle(width, height, 0), explored(width, height, 0) {}

    int width() const { return explored.width(); }
    int height() const { return explored.height(); }
    std::size_t explored_count() const;
};

void update_exploration(ExplorationMap& expl, const Observation& obs);

// Cells within `radius` (Chebyshev) of a known obstacle.
Grid<std::uint8_t> dilate_obstacles(const ExplorationMap& expl, int radius);

bool is_frontier_cell(const ExplorationMap& expl, const Grid<std::uint8_t>& dilated, Cell c);
std::vector<Cell> frontier_cells(const ExplorationMap& expl, const MappingConfig& cfg = {});

struct Frontier {
    std::vector<Cell> cells;  // sorted
    Vec2 centroid;            // cell coordinates (mean of members)
    Cell anchor;              // member cell closest to the centroid
    int size() const { return static_cast<int>(cells.size()); }
    Cell centroid_cell() const;
};

// 8-connected clusters of frontier cells, discarding clusters below the size
// limit. Ordered by first member cell (row-major).
std::vector<Frontier> extract_frontiers(const ExplorationMap& expl, const MappingConfig& cfg = {});

struct SimilarityGrids {
    Grid<double> obj_sem;
    Grid<double> img_sem;

    SimilarityGrids() = default;
    SimilarityGrids(int width, int height) : obj_sem(width, height, 0.0), img_sem(width, height, 0.0) {}
};

// Per-frame record kept for the image-similarity grid.
struct FrameRecord {
    std::vector<Cell> visible_cells;
    Embedding descriptor;  // mean of detection descriptors; empty when there were none
};

FrameRecord make_frame_record(const Observation& obs);

// Folds one frame into img_sem (cellwise max).
void accumulate_image_similarity(SimilarityGrids& grids, const FrameRecord& frame, const Embedding& query_embedding);

void paint_object_similarity(SimilarityGrids& grids, const ObjectCentricMap& map, const Embedding& query_embedding);

SimilarityGrids build_similarity_grids(const ObjectCentricMap& map, const std::vector<FrameRecord>& history,
                                       const Embedding& query_embedding, int width, int height);

// Debug dumps.
std::string render_exploration(const ExplorationMap& expl, const std::vector<Frontier>& frontiers,
                               std::optional<Cell> agent);
nlohmann::json objects_to_json(const ObjectCentricMap& map);

}  // namespace vlngame
