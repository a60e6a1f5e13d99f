#include "vlngame/exploration.hpp"

#include "vlngame/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vlngame {

double frontier_utility(const ExplorationMap& expl, Cell center, double cell_size, double window_m) {
    const int half = static_cast<int>(std::lround(0.5 * window_m / cell_size));
    int total = 0;
    int unknown = 0;
    for (int y = center.y - half; y <= center.y + half; ++y) {
        for (int x = center.x - half; x <= center.x + half; ++x) {
            if (!expl.explored.in_bounds(x, y)) continue;
            ++total;
            if (!expl.explored(x, y)) ++unknown;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(unknown) / total;
}

double score_geometry(const Frontier& f, const ExplorationMap& expl, const DistanceField& from_agent,
                      double lambda_cu, double window_m) {
    const double geodesic = from_agent.at(f.anchor);
    if (!(geodesic < kInf)) return -std::numeric_limits<double>::infinity();
    const double diagonal = std::hypot(expl.width(), expl.height()) * from_agent.cell_size;
    const double utility = frontier_utility(expl, f.centroid_cell(), from_agent.cell_size, window_m);
    return geometry_score(utility, geodesic / diagonal, lambda_cu);
}

SemanticScore score_semantic(const Frontier& f, const SimilarityGrids& grids, int window_cells) {
    const Cell center = f.centroid_cell();
    const int half = window_cells / 2;
    SemanticScore s;
    for (int y = center.y - half; y <= center.y + half; ++y) {
        for (int x = center.x - half; x <= center.x + half; ++x) {
            if (!grids.obj_sem.in_bounds(x, y)) continue;
            s.sem_obj = std::max(s.sem_obj, grids.obj_sem(x, y));
            s.sem_img = std::max(s.sem_img, grids.img_sem(x, y));
        }
    }
    return s;
}

FrontierChoice select_frontier(std::span<const Frontier> frontiers, std::span<const FrontierScore> scores,
                               const Bound& bound) {
    if (frontiers.empty()) throw NoFrontier("no frontier left to explore");
    if (scores.size() != frontiers.size()) throw std::invalid_argument("one score per frontier required");

    double max_obj = -std::numeric_limits<double>::infinity();
    double max_img = -std::numeric_limits<double>::infinity();
    for (const auto& s : scores) {
        max_obj = std::max(max_obj, s.sem_obj);
        max_img = std::max(max_img, s.sem_img);
    }

    FrontierChoice choice;
    double FrontierScore::*key = &FrontierScore::geo;
    if (max_obj > bound.sup) {
        choice.branch = SelectionBranch::object_semantic;
        key = &FrontierScore::sem_obj;
    } else if (max_img > bound.inf) {
        choice.branch = SelectionBranch::image_semantic;
        key = &FrontierScore::sem_img;
    }

    for (std::size_t i = 1; i < frontiers.size(); ++i) {
        const auto& best = scores[choice.index];
        const auto& cand = scores[i];
        bool better = cand.*key > best.*key;
        if (cand.*key == best.*key) {
            if (cand.geodesic != best.geodesic) {
                better = cand.geodesic < best.geodesic;
            } else {
                better = frontiers[i].centroid_cell() < frontiers[choice.index].centroid_cell();
            }
        }
        if (better) choice.index = i;
    }
    return choice;
}

std::string_view to_string(CandidateStatus s) {
    switch (s) {
        case CandidateStatus::tentative: return "tentative";
        case CandidateStatus::pending_identification: return "pending_identification";
        case CandidateStatus::rejected: return "rejected";
        case CandidateStatus::confirmed: return "confirmed";
    }
    return "unknown";
}

namespace {

constexpr std::size_t kMaxViews = 3;

int rank(CandidateStatus s) {
    switch (s) {
        case CandidateStatus::tentative: return 0;
        case CandidateStatus::pending_identification: return 1;
        case CandidateStatus::rejected:
        case CandidateStatus::confirmed: return 2;
    }
    return 0;
}

}  // namespace

void CandidateList::advance(CandidateTarget& c, CandidateStatus to) {
    if (rank(to) <= rank(c.status)) return;
    c.status = to;
}

CandidateList::Update CandidateList::update(const ObjectCentricMap& map, const ExplorationConfig& cfg,
                                            bool has_relations) {
    Update events;
    for (const auto& obj : map.objects) {
        if (!obj.query_similarity) continue;
        const double sim = *obj.query_similarity;
        CandidateTarget* cand = find_mut(obj.map_id);
        if (!cand) {
            if (sim < cfg.cand_tentative) continue;
            items_.push_back(CandidateTarget{obj.map_id, sim, sim, CandidateStatus::tentative, false, {}});
            cand = &items_.back();
            events.new_tentative.push_back(obj.map_id);
        }
        cand->similarity = sim;
        cand->best_similarity = std::max(cand->best_similarity, sim);
        cand->views.push_back({obj.closest_view.empty() ? obj.embedding : obj.closest_view, obj.embedding});
        if (cand->views.size() > kMaxViews) cand->views.erase(cand->views.begin());
        if (cand->status == CandidateStatus::tentative && sim >= cfg.cand_confirm) {
            if (has_relations) {
                advance(*cand, CandidateStatus::pending_identification);
                events.new_pending.push_back(obj.map_id);
            } else {
                advance(*cand, CandidateStatus::pending_identification);
                advance(*cand, CandidateStatus::confirmed);
                events.new_confirmed.push_back(obj.map_id);
            }
        }
    }
    return events;
}

void CandidateList::confirm(int map_id) {
    if (auto* c = find_mut(map_id); c && c->status == CandidateStatus::pending_identification) {
        advance(*c, CandidateStatus::confirmed);
    }
}

void CandidateList::reject(int map_id) {
    if (auto* c = find_mut(map_id); c && c->status == CandidateStatus::pending_identification) {
        advance(*c, CandidateStatus::rejected);
    }
}

void CandidateList::mark_approached(int map_id) {
    if (auto* c = find_mut(map_id)) c->approached = true;
}

const CandidateTarget* CandidateList::find(int map_id) const {
    for (const auto& c : items_) {
        if (c.map_id == map_id) return &c;
    }
    return nullptr;
}

CandidateTarget* CandidateList::find_mut(int map_id) {
    for (auto& c : items_) {
        if (c.map_id == map_id) return &c;
    }
    return nullptr;
}

std::vector<int> CandidateList::with_status(CandidateStatus s) const {
    std::vector<int> out;
    for (const auto& c : items_) {
        if (c.status == s) out.push_back(c.map_id);
    }
    return out;
}

std::optional<int> CandidateList::confirmed() const {
    for (const auto& c : items_) {
        if (c.status == CandidateStatus::confirmed) return c.map_id;
    }
    return std::nullopt;
}

}  // namespace vlngame
