#include "vlngame/errors.hpp"
#include "vlngame/exploration.hpp"
#include "vlngame/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace vlngame;

namespace {

Frontier row_frontier(int x0, int x1, int y) {
    Frontier f;
    double sx = 0;
    for (int x = x0; x <= x1; ++x) {
        f.cells.push_back({x, y});
        sx += x;
    }
    f.centroid = {sx / f.size(), static_cast<double>(y)};
    f.anchor = f.centroid_cell();
    return f;
}

DistanceField field_with(int w, int h, double cell, std::initializer_list<std::pair<Cell, double>> values) {
    DistanceField d;
    d.values = Grid<double>(w, h, kInf);
    d.cell_size = cell;
    for (auto [c, v] : values) d.values[c] = v;
    return d;
}

MapObject object_with(int id, double sim) {
    MapObject o;
    o.map_id = id;
    o.footprint = {{id, 0}};
    o.embedding = {1.0, 0.0};
    o.view_count = 1;
    o.query_similarity = sim;
    return o;
}

}  // namespace

TEST_SUITE("exploration") {

TEST_CASE("score_geometry: authored fixture with U 0.4 and normalized distance 0.3") {
    // 30 x 40 map, 1 m cells: diagonal 50 m. Window 4 m covers 5 x 5 cells.
    ExplorationMap m(30, 40);
    std::fill(m.explored.data().begin(), m.explored.data().end(), 1);
    for (int x = 8; x <= 12; ++x) {
        m.explored(x, 11) = 0;
        m.explored(x, 12) = 0;
    }
    const auto f = row_frontier(8, 12, 10);
    const auto d = field_with(30, 40, 1.0, {{{10, 10}, 15.0}});
    CHECK(frontier_utility(m, f.centroid_cell(), 1.0, 4.0) == doctest::Approx(0.4));
    CHECK(score_geometry(f, m, d, 0.5, 4.0) == doctest::Approx(0.25));
    CHECK(geometry_score(0.4, 0.3, 0.5) == doctest::Approx(0.25));
}

TEST_CASE("score_geometry: frontier at the agent scores its utility") {
    ExplorationMap m(60, 60);
    for (int x = 20; x <= 24; ++x) m.explored(x, 30) = 1;
    const auto f = row_frontier(20, 24, 30);
    const auto d = field_with(60, 60, 0.25, {{f.anchor, 0.0}});
    const double s = score_geometry(f, m, d, 0.5, 10.0);
    CHECK(s == doctest::Approx(frontier_utility(m, f.centroid_cell(), 0.25, 10.0)));
    CHECK(s > 0.99);
}

TEST_CASE("score_geometry: equal utility, nearer frontier scores higher; unreachable is -inf") {
    ExplorationMap m(40, 40);
    const auto a = row_frontier(5, 8, 5), b = row_frontier(30, 33, 30);
    for (const auto* f : {&a, &b}) {
        for (Cell c : f->cells) m.explored[c] = 1;
    }
    const auto d = field_with(40, 40, 0.25, {{a.anchor, 1.0}, {b.anchor, 4.0}});
    CHECK(score_geometry(a, m, d, 0.5, 2.0) > score_geometry(b, m, d, 0.5, 2.0));
    const auto none = field_with(40, 40, 0.25, {});
    CHECK(std::isinf(score_geometry(a, m, none, 0.5, 2.0)));
    CHECK(score_geometry(a, m, none, 0.5, 2.0) < 0);
}

TEST_CASE("score_semantic window") {
    SimilarityGrids g(30, 30);
    const auto f = row_frontier(13, 17, 10);  // centroid cell (15, 10)
    CHECK(score_semantic(f, g, 8).sem_obj == 0.0);
    CHECK(score_semantic(f, g, 8).sem_img == 0.0);

    g.obj_sem(19, 10) = 0.9;  // 4 cells away: inside
    g.img_sem(15, 14) = 0.7;
    auto s = score_semantic(f, g, 8);
    CHECK(s.sem_obj == doctest::Approx(0.9));
    CHECK(s.sem_img == doctest::Approx(0.7));

    SimilarityGrids h(30, 30);
    h.obj_sem(20, 10) = 0.9;  // 5 cells away: outside
    CHECK(score_semantic(f, h, 8).sem_obj == 0.0);
}

TEST_CASE("select_frontier: bounded three-branch rule") {
    const Bound b{0.22, 0.26};
    const std::vector<Frontier> fs = {row_frontier(0, 3, 0), row_frontier(10, 13, 0)};

    SUBCASE("object similarity above sup") {
        const std::vector<FrontierScore> s = {{0.9, 0.10, 0.9, 1.0}, {0.1, 0.30, 0.1, 2.0}};
        const auto c = select_frontier(fs, s, b);
        CHECK(c.index == 1);
        CHECK(c.branch == SelectionBranch::object_semantic);
    }
    SUBCASE("image similarity above inf") {
        const std::vector<FrontierScore> s = {{0.1, 0.25, 0.24, 1.0}, {0.9, 0.26, 0.20, 2.0}};
        const auto c = select_frontier(fs, s, b);
        CHECK(c.index == 0);
        CHECK(c.branch == SelectionBranch::image_semantic);
    }
    SUBCASE("geometry fallback; bounds are strict") {
        const std::vector<FrontierScore> s = {{0.2, 0.26, 0.22, 1.0}, {0.7, 0.10, 0.05, 2.0}};
        const auto c = select_frontier(fs, s, b);
        CHECK(c.index == 1);
        CHECK(c.branch == SelectionBranch::geometry);
    }
    SUBCASE("ties: smaller geodesic, then lower centroid") {
        std::vector<FrontierScore> s = {{0.5, 0, 0, 3.0}, {0.5, 0, 0, 2.0}};
        CHECK(select_frontier(fs, s, b).index == 1);
        s[1].geodesic = 3.0;
        CHECK(select_frontier(fs, s, b).index == 0);
    }
    SUBCASE("empty input") {
        CHECK_THROWS_AS(select_frontier({}, {}, b), NoFrontier);
    }
}

TEST_CASE("select_frontier properties on random inputs") {
    Rng rng(11);
    const Bound b;
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(8));
        std::vector<Frontier> fs;
        std::vector<FrontierScore> s;
        for (int i = 0; i < n; ++i) {
            fs.push_back(row_frontier(10 * i, 10 * i + 3, static_cast<int>(rng.below(5))));
            s.push_back({rng.uniform() * 2 - 1, 0.3 * rng.uniform(), 0.3 * rng.uniform(), 10 * rng.uniform()});
        }
        const auto c = select_frontier(fs, s, b);
        REQUIRE(c.index < fs.size());

        double max_obj = 0;
        for (const auto& x : s) max_obj = std::max(max_obj, x.sem_obj);
        if (max_obj > b.sup) {
            // Branch 1 ignores image similarity and geometry.
            auto t = s;
            for (auto& x : t) {
                x.sem_img = rng.uniform();
                x.geo = rng.uniform() * 5 - 2;
            }
            CHECK(select_frontier(fs, t, b).index == c.index);
        } else if (c.branch == SelectionBranch::geometry) {
            auto t = s;
            const double k = 0.1 + 10 * rng.uniform();
            for (auto& x : t) x.geo *= k;
            CHECK(select_frontier(fs, t, b).index == c.index);
        }
    }
}

TEST_CASE("candidate list thresholds") {
    ExplorationConfig cfg;
    ObjectCentricMap m;
    m.objects = {object_with(0, 0.85), object_with(1, 0.92), object_with(2, 0.5)};

    SUBCASE("relation-free query") {
        CandidateList cl;
        const auto ev = cl.update(m, cfg, false);
        REQUIRE(cl.find(0));
        CHECK(cl.find(0)->status == CandidateStatus::tentative);
        REQUIRE(cl.find(1));
        CHECK(cl.find(1)->status == CandidateStatus::confirmed);
        CHECK(cl.find(2) == nullptr);
        CHECK(ev.new_confirmed == std::vector<int>{1});
        CHECK(cl.confirmed() == 1);
    }
    SUBCASE("relation query: approach raises similarity to pending") {
        CandidateList cl;
        m.objects = {object_with(0, 0.85)};
        cl.update(m, cfg, true);
        CHECK(cl.find(0)->status == CandidateStatus::tentative);
        m.objects[0].query_similarity = 0.91;
        const auto ev = cl.update(m, cfg, true);
        CHECK(cl.find(0)->status == CandidateStatus::pending_identification);
        CHECK(ev.new_pending == std::vector<int>{0});
        CHECK(cl.find(0)->best_similarity == doctest::Approx(0.91));
    }
}

TEST_CASE("candidate status never moves backward") {
    ExplorationConfig cfg;
    ObjectCentricMap m;
    m.objects = {object_with(0, 0.95), object_with(1, 0.95)};
    CandidateList cl;
    cl.update(m, cfg, true);
    cl.reject(0);
    cl.confirm(1);
    CHECK(cl.find(0)->status == CandidateStatus::rejected);
    CHECK(cl.find(1)->status == CandidateStatus::confirmed);

    // Further updates, confirm/reject calls and similarity drops leave them terminal.
    m.objects[0].query_similarity = 0.2;
    m.objects[1].query_similarity = 0.99;
    cl.update(m, cfg, true);
    cl.confirm(0);
    cl.reject(1);
    CHECK(cl.find(0)->status == CandidateStatus::rejected);
    CHECK(cl.find(1)->status == CandidateStatus::confirmed);

    // Tentative candidates cannot be confirmed or rejected directly.
    ObjectCentricMap m2;
    m2.objects = {object_with(5, 0.82)};
    CandidateList c2;
    c2.update(m2, cfg, true);
    c2.confirm(5);
    c2.reject(5);
    CHECK(c2.find(5)->status == CandidateStatus::tentative);
}

TEST_CASE("random similarity sequences keep candidate status monotone") {
    Rng rng(8);
    ExplorationConfig cfg;
    auto rank = [](CandidateStatus s) {
        return s == CandidateStatus::tentative ? 0 : s == CandidateStatus::pending_identification ? 1 : 2;
    };
    for (int trial = 0; trial < 50; ++trial) {
        ObjectCentricMap m;
        for (int i = 0; i < 4; ++i) m.objects.push_back(object_with(i, 0.0));
        CandidateList cl;
        std::map<int, CandidateStatus> last;
        for (int t = 0; t < 30; ++t) {
            for (auto& o : m.objects) o.query_similarity = 0.7 + 0.3 * rng.uniform();
            cl.update(m, cfg, rng.uniform() < 0.7);
            const int id = static_cast<int>(rng.below(4));
            if (rng.uniform() < 0.5) {
                cl.confirm(id);
            } else {
                cl.reject(id);
            }
            for (const auto& c : cl.items()) {
                if (auto it = last.find(c.map_id); it != last.end()) {
                    CHECK(rank(c.status) >= rank(it->second));
                    if (rank(it->second) == 2) CHECK(c.status == it->second);
                }
                last[c.map_id] = c.status;
            }
        }
    }
}

}  // TEST_SUITE
