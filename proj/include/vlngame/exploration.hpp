#pragma once

#include "vlngame/mapping.hpp"
#include "vlngame/planning.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace vlngame {

struct Bound {
    double inf = 0.22;
    double sup = 0.26;
};

struct ExplorationConfig {
    double lambda_cu = 0.5;
    double window_utility_m = 2.0;
    int window_semantic_cells = 8;
    Bound bound;
    double cand_tentative = 0.80;
    double cand_confirm = 0.90;
    double approach_distance_m = 1.5;
};

struct FrontierScore {
    double geo = 0.0;
    double sem_obj = 0.0;
    double sem_img = 0.0;
    double geodesic = kInf;  // meters from the agent, tie-break only
};

// S_geo = utility - lambda * cost.
inline double geometry_score(double utility, double cost, double lambda_cu) { return utility - lambda_cu * cost; }

// Fraction of unexplored in-bounds cells in the square window of side
// `window_m` centered on `center`.
double frontier_utility(const ExplorationMap& expl, Cell center, double cell_size, double window_m);

// Geometry score using the geodesic field from the agent's cell. Returns -inf
// when the frontier is unreachable.
double score_geometry(const Frontier& f, const ExplorationMap& expl, const DistanceField& from_agent,
                      double lambda_cu, double window_m);

struct SemanticScore {
    double sem_obj = 0.0;
    double sem_img = 0.0;
};

// Max of each grid over the window of side `window_cells` (spanning +-window/2)
// around the frontier centroid.
SemanticScore score_semantic(const Frontier& f, const SimilarityGrids& grids, int window_cells = 8);

enum class SelectionBranch { object_semantic, image_semantic, geometry };

struct FrontierChoice {
    std::size_t index = 0;
    SelectionBranch branch = SelectionBranch::geometry;
};

// Bounded three-branch rule; throws NoFrontier on empty input.
FrontierChoice select_frontier(std::span<const Frontier> frontiers, std::span<const FrontierScore> scores,
                               const Bound& bound);

enum class CandidateStatus { tentative, pending_identification, rejected, confirmed };

std::string_view to_string(CandidateStatus s);

struct ViewPair {
    Embedding first_person;
    Embedding top_down;
};

struct CandidateTarget {
    int map_id = 0;
    double best_similarity = 0.0;
    double similarity = 0.0;
    CandidateStatus status = CandidateStatus::tentative;
    bool approached = false;  // a closer look was already taken
    std::vector<ViewPair> views;
};

// Candidate list kept across steps. Status only moves forward along
// tentative -> pending_identification -> {confirmed, rejected}.
class CandidateList {
public:
    struct Update {
        std::vector<int> new_tentative;
        std::vector<int> new_pending;
        std::vector<int> new_confirmed;
    };

    // Uses each map object's query_similarity. Without relations, reaching the
    // confirm threshold confirms directly.
    Update update(const ObjectCentricMap& map, const ExplorationConfig& cfg, bool has_relations);

    void confirm(int map_id);
    void reject(int map_id);
    void mark_approached(int map_id);

    const std::vector<CandidateTarget>& items() const { return items_; }
    const CandidateTarget* find(int map_id) const;
    std::vector<int> with_status(CandidateStatus s) const;
    std::optional<int> confirmed() const;

private:
    CandidateTarget* find_mut(int map_id);
    void advance(CandidateTarget& c, CandidateStatus to);

    std::vector<CandidateTarget> items_;
};

}  // namespace vlngame
