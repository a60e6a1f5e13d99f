#include "support/fixtures.hpp"

#include "vlngame/errors.hpp"
#include "vlngame/harness.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace vlngame;

namespace {

EpisodeResult result(std::string id, bool success, double l, double p, double dtg, Variant v = Variant::game) {
    EpisodeResult r;
    r.episode_id = std::move(id);
    r.variant = v;
    r.success = success;
    r.shortest_m = l;
    r.path_m = p;
    r.dtg_m = dtg;
    r.steps = 10;
    return r;
}

// Fixed-truth synthetic channels, independent of any scene.
class FixedOracle final : public Oracle {
public:
    FixedOracle(std::vector<double> truth, SyntheticOracleConfig cfg) : truth_(std::move(truth)), cfg_(cfg) {}

    std::optional<int> sample_answer(const CandidatePack& pack, Rng& rng) override {
        const auto w = synthetic_generative(pack, truth_, cfg_);
        double total = 0.0;
        for (double x : w) total += x;
        double u = rng.uniform() * total;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (u < w[i]) return static_cast<int>(i);
            u -= w[i];
        }
        return static_cast<int>(w.size() - 1);
    }
    std::vector<std::optional<bool>> sample_verdicts(const CandidatePack& pack, Rng& rng) override {
        const auto w = synthetic_discriminative(pack, truth_, cfg_);
        std::vector<std::optional<bool>> out(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) out[i] = rng.uniform() < w[i];
        return out;
    }
    std::optional<std::vector<double>> generative_weights(const CandidatePack& pack) override {
        return synthetic_generative(pack, truth_, cfg_);
    }
    std::optional<std::vector<double>> discriminative_weights(const CandidatePack& pack) override {
        return synthetic_discriminative(pack, truth_, cfg_);
    }

private:
    std::vector<double> truth_;
    SyntheticOracleConfig cfg_;
};

CandidatePack pack_of(int n) {
    CandidatePack p;
    p.query.raw_text = "chair";
    p.query.main_goal.category = "chair";
    for (int i = 0; i < n; ++i) {
        CandidateView c;
        c.id = i;
        c.label = "chair";
        c.similarity = 0.8 + 0.01 * i;  // clip_only prefers the last candidate
        p.candidates.push_back(c);
    }
    return p;
}

// 20 x 12 walled room with a chair 2.5 m in front of the start.
Episode visible_target_episode() {
    auto scene = std::make_shared<GridScene>(
        fixtures::make_scene(20, 12, fixtures::border(20, 12), {{"chair", {}, {{16, 6}}}}));
    Query q;
    q.raw_text = "the chair";
    q.main_goal.category = "chair";
    q.goal_object_ids = {0};
    return fixtures::make_episode(scene, q, {1.625, 1.625, 0.0}, "visible");
}

RunConfig noiseless_config() {
    RunConfig cfg;
    cfg.variant = Variant::game;
    cfg.agent.sensor_noise = 0.0;
    return cfg;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("compute_metrics") {
    const std::vector<EpisodeResult> rs = {result("a", true, 10, 12, 0.5), result("b", false, 5, 20, 3.0),
                                           result("c", true, 8, 8, 0.2)};
    const auto m = compute_metrics(rs);
    CHECK(m.n == 3);
    CHECK(m.sr == doctest::Approx(2.0 / 3.0));
    CHECK(m.spl == doctest::Approx((10.0 / 12.0 + 1.0) / 3.0));
    CHECK(m.dtg_mean == doctest::Approx(3.7 / 3.0));
    CHECK(m.variant == "game");

    // A path shorter than the reference still caps the efficiency at 1.
    CHECK(compute_metrics({result("d", true, 10, 6, 0)}).spl == doctest::Approx(1.0));

    auto mixed = rs;
    mixed.push_back(result("a", false, 10, 10, 1.0, Variant::clip_only));
    const auto mm = compute_metrics(mixed);
    CHECK(mm.variant == "mixed");
    CHECK(mm.per_variant.size() == 2);
    CHECK(mm.per_variant.at("clip_only").sr == 0.0);
    CHECK(summary_to_json(mm).contains("per_variant"));

    CHECK_THROWS_AS(compute_metrics({}), EmptyBatch);
}

TEST_CASE("results csv round trip") {
    auto a = result("ep,1", true, 10.25, 12.5, 0.125);
    a.seed = 77;
    a.termination = Termination::stopped_success;
    auto b = result("ep2", false, 3, 9, 4, Variant::ranking);
    b.termination = Termination::no_frontier;
    std::stringstream io;
    write_results_csv(io, {a, b});
    const auto back = read_results_csv(io);
    REQUIRE(back.size() == 2);
    CHECK(back[0].episode_id == "ep,1");
    CHECK(back[0].seed == 77);
    CHECK(back[0].success);
    CHECK(back[0].path_m == doctest::Approx(12.5));
    CHECK(back[0].termination == Termination::stopped_success);
    CHECK(back[1].variant == Variant::ranking);
    CHECK(back[1].termination == Termination::no_frontier);

    std::stringstream bad("nope\n");
    CHECK_THROWS_AS(read_results_csv(bad), ConfigError);
    std::stringstream empty;
    CHECK_THROWS_AS(read_results_csv(empty), ConfigError);
}

TEST_CASE("enum parsing") {
    for (auto v : {Variant::clip_only, Variant::generator_only, Variant::ranking, Variant::game}) {
        CHECK(parse_variant(to_string(v)) == v);
    }
    CHECK_THROWS_AS(parse_variant("best"), ConfigError);
    for (auto t : {Termination::stopped_success, Termination::stopped_wrong, Termination::step_limit,
                   Termination::no_frontier}) {
        CHECK(parse_termination(to_string(t)) == t);
    }
}

TEST_CASE("modal_answer") {
    const std::vector<double> counts = {3, 2, 0};  // answers {0,0,1,0,1}
    CHECK(modal_answer(counts) == 0);
    CHECK(modal_answer(std::vector<double>{1, 2, 2}) == 1);
    CHECK(modal_answer(std::vector<double>{0, 0}) == std::nullopt);
}

TEST_CASE("episode seeds are distinct and stable") {
    CHECK(episode_seed(5, 0) == episode_seed(5, 0));
    CHECK(episode_seed(5, 0) != episode_seed(5, 1));
    CHECK(episode_seed(5, 0) != episode_seed(6, 0));
}

TEST_CASE("every variant agrees with a noiseless oracle") {
    const auto p = pack_of(3);
    const std::vector<double> truth = {0.0, 1.0, 0.0, 0.0};
    FixedOracle oracle(truth, {});
    const EquilibriumConfig eq;
    Rng rng(1);
    for (auto v : {Variant::generator_only, Variant::ranking, Variant::game}) {
        CHECK(identify_with_variant(v, p, oracle, eq, 5, rng).choice == 1);
    }
    CHECK(identify_with_variant(Variant::clip_only, p, oracle, eq, 5, rng).choice == 2);
    const auto game = identify_with_variant(Variant::game, p, oracle, eq, 5, rng);
    REQUIRE(game.game);
    CHECK(game.game->iterations >= 1);

    // A no-match answer maps to no choice.
    FixedOracle none(std::vector<double>{0.0, 0.0, 0.0, 1.0}, {});
    CHECK(identify_with_variant(Variant::game, p, none, eq, 5, rng).choice == std::nullopt);
    CHECK(identify_with_variant(Variant::generator_only, p, none, eq, 5, rng).choice == std::nullopt);
}

TEST_CASE("the game can overrule the generator alone") {
    const auto p = pack_of(3);
    const std::vector<double> truth = {1.0, 2.0 / 3.0, 2.0 / 3.0, 0.0};
    const EquilibriumConfig eq;
    Rng rng(0);
    int differ = 0;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        FixedOracle oracle(truth, {seed, 0.5, 0.5, 1.0, 1.0});
        const auto g = identify_with_variant(Variant::game, p, oracle, eq, 5, rng).choice;
        const auto s = identify_with_variant(Variant::generator_only, p, oracle, eq, 5, rng).choice;
        differ += g != s;
    }
    CHECK(differ > 0);
}

TEST_CASE("run_episode: a visible target is reached and stopped at") {
    const auto ep = visible_target_episode();
    const auto r = run_episode(noiseless_config(), ep, 1);
    CHECK(r.termination == Termination::stopped_success);
    CHECK(r.success);
    CHECK(r.steps <= 20);
    CHECK(r.dtg_m <= ep.success_radius);
    CHECK(r.path_m > 0.0);
    CHECK(r.shortest_m == doctest::Approx(shortest_path_length(ep)));
}

TEST_CASE("run_episode: a closed room without the target runs out of frontiers") {
    auto scene = std::make_shared<GridScene>(
        fixtures::make_scene(12, 12, fixtures::border(12, 12), {{"sofa", {}, {{8, 6}}}}));
    Query q;
    q.raw_text = "the chair";
    q.main_goal.category = "chair";
    const auto ep = fixtures::make_episode(scene, q, {1.625, 1.625, 0.0}, "empty");
    const auto r = run_episode(noiseless_config(), ep, 1);
    CHECK(r.termination == Termination::no_frontier);
    CHECK_FALSE(r.success);
    CHECK(r.dtg_m == 0.0);
    CHECK(r.steps < ep.max_steps);
}

TEST_CASE("run_episode: a one-step budget ends at the step limit") {
    auto cfg = noiseless_config();
    cfg.max_steps = 1;
    const auto r = run_episode(cfg, load_episode(fixtures::data_dir() / "episodes" / "office_small_chair.json"), 1);
    CHECK(r.termination == Termination::step_limit);
    CHECK(r.steps == 1);
}

TEST_CASE("run_episode reports every step to the observer") {
    const auto ep = visible_target_episode();
    int calls = 0, last = 0;
    const auto r = run_episode(noiseless_config(), ep, 1, [&](const StepSnapshot& s) {
        ++calls;
        CHECK(s.step > last);
        last = s.step;
        CHECK(s.exploration != nullptr);
    });
    CHECK(calls == r.steps);
}

TEST_CASE("config loading") {
    const auto dir = fixtures::scratch("harness_cfg");
    fixtures::write_json(dir / "c.json", {{"episodes", {"a.json"}},
                                          {"variant", "ranking"},
                                          {"seed", 9},
                                          {"parallel", 2},
                                          {"oracle", {{"kind", "synthetic"}, {"gen_noise", 0.3}}},
                                          {"equilibrium", {{"iters", 100}}},
                                          {"agent", {{"frontier_policy", "nearest"}}}});
    const auto cfg = load_run_config(dir / "c.json");
    REQUIRE(cfg.episodes.size() == 1);
    CHECK(cfg.episodes[0] == dir / "a.json");
    CHECK(cfg.variant == Variant::ranking);
    CHECK(cfg.master_seed == 9);
    CHECK(cfg.parallel == 2);
    CHECK(cfg.oracle.synthetic.gen_noise == doctest::Approx(0.3));
    CHECK(cfg.agent.equilibrium.iters == 100);
    CHECK(cfg.agent.frontier_policy == FrontierPolicy::nearest);

    CHECK_THROWS_AS(run_config_from_json({{"episodes", {"a"}}, {"colour", 1}}, dir), ConfigError);
    CHECK_THROWS_AS(run_config_from_json({{"oracle", {{"kind", "psychic"}}}}, dir), ConfigError);
    CHECK_THROWS_AS(run_config_from_json({{"oracle", {{"noise", 1}}}}, dir), ConfigError);
    CHECK_THROWS_AS(load_run_config(dir / "missing.json"), ConfigError);

    RunConfig v;
    CHECK_THROWS_AS(v.validate(), ConfigError);
    v.episodes = {"x"};
    CHECK_NOTHROW(v.validate());
    v.parallel = 0;
    CHECK_THROWS_AS(v.validate(), ConfigError);
    v.parallel = 1;
    v.agent.equilibrium.iters = 0;
    CHECK_THROWS_AS(v.validate(), ConfigError);
}

TEST_CASE("demo config resolves its episode directory") {
    const auto cfg = load_run_config(fixtures::data_dir() / "config.json");
    REQUIRE(cfg.episodes.size() == 1);
    CHECK(cfg.episodes[0].filename() == "office_small_chair.json");
}

TEST_CASE("run_batch is deterministic and parallel-safe") {
    const auto dir = fixtures::scratch("harness_batch");
    SuiteOptions opts;
    opts.episodes = 4;
    opts.seed = 5;
    RunConfig base;
    base.master_seed = 3;
    base.oracle.synthetic.gen_noise = 0.5;
    base.oracle.synthetic.disc_noise = 0.5;
    write_suite(generate_suite(opts), dir, base);

    auto cfg = load_run_config(dir / "config.json");
    REQUIRE(cfg.episodes.size() == 4);
    std::string reference;
    for (int parallel : {1, 1, 4}) {
        cfg.parallel = parallel;
        cfg.out_dir = dir / ("out" + std::to_string(parallel));
        const auto out = run_batch(cfg);
        CHECK(out.errors.empty());
        CHECK(out.results.size() == 4);
        REQUIRE(out.summary);
        const auto csv = slurp(cfg.out_dir / "results.csv");
        if (reference.empty()) reference = csv;
        CHECK(csv == reference);
        CHECK(std::filesystem::exists(cfg.out_dir / "summary.json"));
    }
}

TEST_CASE("run_batch with a missing scene fails before writing output") {
    const auto dir = fixtures::scratch("harness_missing");
    fixtures::write_json(dir / "ep.json", {{"id", "x"},
                                           {"scene", "nowhere.json"},
                                           {"start", {{"x", 1.0}, {"y", 1.0}, {"heading", 0.0}}},
                                           {"query", {{"raw_text", "chair"}, {"main_goal", {{"category", "chair"}}}}}});
    RunConfig cfg;
    cfg.episodes = {dir / "ep.json"};
    cfg.out_dir = dir / "out";
    CHECK_THROWS_AS(run_batch(cfg), ConfigError);
    CHECK_FALSE(std::filesystem::exists(cfg.out_dir / "results.csv"));
}

TEST_CASE("generated suites are valid") {
    SuiteOptions opts;
    opts.episodes = 6;
    opts.seed = 11;
    const auto suite = generate_suite(opts);
    REQUIRE(suite.size() == 6);
    for (const auto& ep : suite) {
        CHECK_FALSE(ep.query.goal_object_ids.empty());
        CHECK(ep.query.has_relations());
        const Cell start = cell_of(ep.start.position(), ep.scene->cell_size);
        CHECK(ep.scene->occupancy[start] == Occupancy::free);
        int same = 0;
        for (const auto& o : ep.scene->objects) same += o.category == ep.query.main_goal.category;
        CHECK(same >= 1 + opts.min_distractors);
        for (int id : ep.query.goal_object_ids) {
            const auto* obj = ep.scene->find_object(id);
            REQUIRE(obj);
            CHECK(relation_truth_score(*ep.scene, *obj, ep.query) == 1.0);
        }
        CHECK(shortest_path_length(ep) > ep.scene->cell_size);
    }
    const auto again = generate_suite(opts);
    CHECK(scene_to_json(*again[2].scene) == scene_to_json(*suite[2].scene));
}

}  // TEST_SUITE
