#include "vlngame/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <sstream>

namespace vlngame {

Vec2 MapObject::centroid(double cell_size) const {
    Vec2 sum;
    for (const auto& c : footprint) {
        const Vec2 p = cell_center(c, cell_size);
        sum.x += p.x;
        sum.y += p.y;
    }
    const double n = footprint.empty() ? 1.0 : static_cast<double>(footprint.size());
    return {sum.x / n, sum.y / n};
}

std::optional<int> MapObject::majority_source() const {
    std::optional<int> best;
    int best_votes = 0;
    for (const auto& [id, votes] : source_votes) {
        if (votes > best_votes) {
            best_votes = votes;
            best = id;
        }
    }
    return best;
}

const MapObject* ObjectCentricMap::find(int map_id) const {
    for (const auto& o : objects) {
        if (o.map_id == map_id) return &o;
    }
    return nullptr;
}

MapObject* ObjectCentricMap::find(int map_id) {
    for (auto& o : objects) {
        if (o.map_id == map_id) return &o;
    }
    return nullptr;
}

double footprint_iou(const std::vector<Cell>& a, const std::vector<Cell>& b) {
    std::vector<Cell> common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    const std::size_t uni = a.size() + b.size() - common.size();
    return uni == 0 ? 0.0 : static_cast<double>(common.size()) / static_cast<double>(uni);
}

double association_score(const Detection& det, const MapObject& obj, const MappingConfig& cfg) {
    return cfg.w_geo * footprint_iou(det.footprint, obj.footprint) + cfg.w_sem * cosine(det.descriptor, obj.embedding);
}

void integrate(ObjectCentricMap& map, const Observation& obs, const AgentPose& /*pose*/, const MappingConfig& cfg) {
    for (const auto& det : obs.detections) {
        MapObject* target = nullptr;
        double best = -std::numeric_limits<double>::infinity();
        for (auto& obj : map.objects) {
            const double s = association_score(det, obj, cfg);
            if (s > best) {
                best = s;
                target = &obj;
            }
        }
        if (!target || best < cfg.merge_threshold) {
            MapObject fresh;
            fresh.map_id = map.next_id++;
            fresh.embedding.assign(det.descriptor.size(), 0.0);
            fresh.descriptor_sum.assign(det.descriptor.size(), 0.0);
            map.objects.push_back(std::move(fresh));
            target = &map.objects.back();
        }

        std::vector<Cell> merged;
        std::set_union(target->footprint.begin(), target->footprint.end(), det.footprint.begin(),
                       det.footprint.end(), std::back_inserter(merged));
        target->footprint = std::move(merged);
        for (std::size_t i = 0; i < target->descriptor_sum.size(); ++i) target->descriptor_sum[i] += det.descriptor[i];
        target->embedding = target->descriptor_sum;
        normalize_in_place(target->embedding);
        ++target->view_count;
        ++target->source_votes[det.object_id];
        if (det.distance < target->closest_distance) {
            target->closest_distance = det.distance;
            target->closest_view = det.descriptor;
        }
    }
}

void refresh_similarity(ObjectCentricMap& map, const Embedding& query_embedding) {
    for (auto& obj : map.objects) obj.query_similarity = unit_similarity(cosine(obj.embedding, query_embedding));
}

std::size_t ExplorationMap::explored_count() const {
    return static_cast<std::size_t>(std::count(explored.data().begin(), explored.data().end(), std::uint8_t{1}));
}

void update_exploration(ExplorationMap& expl, const Observation& obs) {
    for (const auto& c : obs.visible_cells) {
        if (expl.explored.in_bounds(c)) expl.explored[c] = 1;
    }
    for (const auto& c : obs.obstacle_cells) {
        if (expl.obstacle.in_bounds(c)) expl.obstacle[c] = 1;
    }
}

Grid<std::uint8_t> dilate_obstacles(const ExplorationMap& expl, int radius) {
    Grid<std::uint8_t> out(expl.width(), expl.height(), 0);
    for (int y = 0; y < expl.height(); ++y) {
        for (int x = 0; x < expl.width(); ++x) {
            if (!expl.obstacle(x, y)) continue;
            for (int dy = -radius; dy <= radius; ++dy) {
                for (int dx = -radius; dx <= radius; ++dx) {
                    if (out.in_bounds(x + dx, y + dy)) out(x + dx, y + dy) = 1;
                }
            }
        }
    }
    return out;
}

bool is_frontier_cell(const ExplorationMap& expl, const Grid<std::uint8_t>& dilated, Cell c) {
    if (!expl.explored.in_bounds(c) || !expl.explored[c] || expl.obstacle[c] || dilated[c]) return false;
    for (int k = 0; k < 4; ++k) {
        const Cell n{c.x + kDx4[k], c.y + kDy4[k]};
        if (expl.explored.in_bounds(n) && !expl.explored[n]) return true;
    }
    return false;
}

std::vector<Cell> frontier_cells(const ExplorationMap& expl, const MappingConfig& cfg) {
    const auto dilated = dilate_obstacles(expl, cfg.dilation_radius);
    std::vector<Cell> out;
    for (int y = 0; y < expl.height(); ++y) {
        for (int x = 0; x < expl.width(); ++x) {
            if (is_frontier_cell(expl, dilated, {x, y})) out.push_back({x, y});
        }
    }
    return out;
}

Cell Frontier::centroid_cell() const {
    return {static_cast<int>(std::lround(centroid.x)), static_cast<int>(std::lround(centroid.y))};
}

std::vector<Frontier> extract_frontiers(const ExplorationMap& expl, const MappingConfig& cfg) {
    const auto cells = frontier_cells(expl, cfg);
    Grid<std::uint8_t> is_frontier(expl.width(), expl.height(), 0);
    for (const auto& c : cells) is_frontier[c] = 1;
    Grid<std::uint8_t> seen(expl.width(), expl.height(), 0);

    std::vector<Frontier> out;
    for (const auto& seed : cells) {
        if (seen[seed]) continue;
        Frontier f;
        std::vector<Cell> stack{seed};
        seen[seed] = 1;
        while (!stack.empty()) {
            const Cell c = stack.back();
            stack.pop_back();
            f.cells.push_back(c);
            for (int k = 0; k < 8; ++k) {
                const Cell n{c.x + kDx8[k], c.y + kDy8[k]};
                if (is_frontier.in_bounds(n) && is_frontier[n] && !seen[n]) {
                    seen[n] = 1;
                    stack.push_back(n);
                }
            }
        }
        if (f.size() < cfg.min_frontier_size) continue;
        std::sort(f.cells.begin(), f.cells.end());
        double sx = 0.0;
        double sy = 0.0;
        for (const auto& c : f.cells) {
            sx += c.x;
            sy += c.y;
        }
        f.centroid = {sx / f.size(), sy / f.size()};
        double best = std::numeric_limits<double>::infinity();
        for (const auto& c : f.cells) {
            const double d = std::hypot(c.x - f.centroid.x, c.y - f.centroid.y);
            if (d < best) {
                best = d;
                f.anchor = c;
            }
        }
        out.push_back(std::move(f));
    }
    return out;
}

FrameRecord make_frame_record(const Observation& obs) {
    FrameRecord rec;
    rec.visible_cells = obs.visible_cells;
    if (!obs.detections.empty()) {
        rec.descriptor.assign(obs.detections.front().descriptor.size(), 0.0);
        for (const auto& det : obs.detections) {
            for (std::size_t i = 0; i < rec.descriptor.size(); ++i) rec.descriptor[i] += det.descriptor[i];
        }
        for (auto& v : rec.descriptor) v /= static_cast<double>(obs.detections.size());
    }
    return rec;
}

void accumulate_image_similarity(SimilarityGrids& grids, const FrameRecord& frame, const Embedding& query_embedding) {
    if (frame.descriptor.empty() || norm(frame.descriptor) == 0.0) return;
    const double s = unit_similarity(cosine(frame.descriptor, query_embedding));
    for (const auto& c : frame.visible_cells) {
        if (grids.img_sem.in_bounds(c)) grids.img_sem[c] = std::max(grids.img_sem[c], s);
    }
}

void paint_object_similarity(SimilarityGrids& grids, const ObjectCentricMap& map, const Embedding& query_embedding) {
    std::fill(grids.obj_sem.data().begin(), grids.obj_sem.data().end(), 0.0);
    for (const auto& obj : map.objects) {
        const double s = unit_similarity(cosine(obj.embedding, query_embedding));
        for (const auto& c : obj.footprint) {
            if (grids.obj_sem.in_bounds(c)) grids.obj_sem[c] = std::max(grids.obj_sem[c], s);
        }
    }
}

SimilarityGrids build_similarity_grids(const ObjectCentricMap& map, const std::vector<FrameRecord>& history,
                                       const Embedding& query_embedding, int width, int height) {
    SimilarityGrids grids(width, height);
    paint_object_similarity(grids, map, query_embedding);
    for (const auto& frame : history) accumulate_image_similarity(grids, frame, query_embedding);
    return grids;
}

std::string render_exploration(const ExplorationMap& expl, const std::vector<Frontier>& frontiers,
                               std::optional<Cell> agent) {
    Grid<char> canvas(expl.width(), expl.height(), ' ');
    for (int y = 0; y < expl.height(); ++y) {
        for (int x = 0; x < expl.width(); ++x) {
            if (expl.obstacle(x, y)) {
                canvas(x, y) = '#';
            } else if (expl.explored(x, y)) {
                canvas(x, y) = '.';
            } else {
                canvas(x, y) = '?';
            }
        }
    }
    for (const auto& f : frontiers) {
        for (const auto& c : f.cells) canvas[c] = 'F';
    }
    if (agent && canvas.in_bounds(*agent)) canvas[*agent] = '@';
    std::ostringstream out;
    // Top row printed first so +y points up.
    for (int y = expl.height() - 1; y >= 0; --y) {
        for (int x = 0; x < expl.width(); ++x) out << canvas(x, y);
        out << '\n';
    }
    return out.str();
}

nlohmann::json objects_to_json(const ObjectCentricMap& map) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& obj : map.objects) {
        nlohmann::json cells = nlohmann::json::array();
        for (const auto& c : obj.footprint) cells.push_back({c.x, c.y});
        nlohmann::json entry = {{"map_id", obj.map_id},
                                {"footprint", cells},
                                {"embedding", obj.embedding},
                                {"view_count", obj.view_count}};
        if (obj.query_similarity) entry["similarity"] = *obj.query_similarity;
        out.push_back(std::move(entry));
    }
    return out;
}

}  // namespace vlngame
