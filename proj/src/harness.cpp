#include "vlngame/harness.hpp"

#include "vlngame/errors.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <mutex>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace vlngame {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::clip_only: return "clip_only";
        case Variant::generator_only: return "generator_only";
        case Variant::ranking: return "ranking";
        case Variant::game: return "game";
    }
    return "unknown";
}

Variant parse_variant(std::string_view s) {
    for (auto v : {Variant::clip_only, Variant::generator_only, Variant::ranking, Variant::game}) {
        if (to_string(v) == s) return v;
    }
    throw ConfigError("unknown variant '" + std::string(s) + "'");
}

std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::stopped_success: return "stopped_success";
        case Termination::stopped_wrong: return "stopped_wrong";
        case Termination::step_limit: return "step_limit";
        case Termination::no_frontier: return "no_frontier";
    }
    return "unknown";
}

Termination parse_termination(std::string_view s) {
    for (auto t : {Termination::stopped_success, Termination::stopped_wrong, Termination::step_limit,
                   Termination::no_frontier}) {
        if (to_string(t) == s) return t;
    }
    throw ConfigError("unknown termination '" + std::string(s) + "'");
}

void RunConfig::validate() const {
    if (episodes.empty()) throw ConfigError("config lists no episodes");
    if (parallel < 1) throw ConfigError("parallel must be >= 1");
    if (variant == Variant::ranking && agent.samples < 2) throw ConfigError("ranking needs samples >= 2");
    if (agent.samples < 1) throw ConfigError("samples must be >= 1");
    if (agent.replan_interval < 1) throw ConfigError("replan_interval must be >= 1");
    if (max_steps && *max_steps < 1) throw ConfigError("max_steps must be >= 1");
    try {
        agent.equilibrium.validate();
        if (oracle.kind == OracleSelection::Kind::synthetic) oracle.synthetic.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (oracle.kind == OracleSelection::Kind::remote) oracle.remote.validate();
}

namespace {

template <typename T>
void read_opt(const json& doc, const char* key, T& out) {
    if (!doc.contains(key) || doc.at(key).is_null()) return;
    try {
        out = doc.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

void check_keys(const json& doc, std::initializer_list<std::string_view> known, const char* where) {
    if (!doc.is_object()) throw ConfigError(std::string(where) + " must be an object");
    for (const auto& [key, _] : doc.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError(std::string("unknown key '") + key + "' in " + where);
        }
    }
}

}  // namespace

RunConfig run_config_from_json(const json& doc, const fs::path& base_dir) {
    check_keys(doc,
               {"episodes", "episode_dir", "variant", "seed", "parallel", "out_dir", "max_steps",
                "record_wall_time", "oracle", "agent", "equilibrium", "exploration"},
               "config");
    RunConfig cfg;
    if (doc.contains("episodes")) {
        std::vector<std::string> eps;
        read_opt(doc, "episodes", eps);
        for (const auto& e : eps) cfg.episodes.push_back(base_dir / e);
    }
    if (doc.contains("episode_dir")) {
        std::string dir;
        read_opt(doc, "episode_dir", dir);
        const fs::path p = base_dir / dir;
        if (!fs::is_directory(p)) throw ConfigError("episode_dir " + p.string() + " is not a directory");
        std::vector<fs::path> found;
        for (const auto& entry : fs::directory_iterator(p)) {
            if (entry.path().extension() == ".json") found.push_back(entry.path());
        }
        std::sort(found.begin(), found.end());
        cfg.episodes.insert(cfg.episodes.end(), found.begin(), found.end());
    }
    if (doc.contains("variant")) cfg.variant = parse_variant(doc.at("variant").get<std::string>());
    read_opt(doc, "seed", cfg.master_seed);
    read_opt(doc, "parallel", cfg.parallel);
    if (doc.contains("out_dir")) cfg.out_dir = base_dir / doc.at("out_dir").get<std::string>();
    if (doc.contains("max_steps") && !doc.at("max_steps").is_null()) cfg.max_steps = doc.at("max_steps").get<int>();
    read_opt(doc, "record_wall_time", cfg.record_wall_time);

    if (doc.contains("oracle")) {
        const auto& o = doc.at("oracle");
        check_keys(o,
                   {"kind", "gen_noise", "disc_noise", "gen_bias", "disc_bias", "sharpness", "temperature",
                    "base_url", "path", "model", "samples", "timeout_s", "max_in_flight", "max_retries"},
                   "oracle");
        const std::string kind = o.value("kind", "synthetic");
        if (kind == "synthetic") {
            cfg.oracle.kind = OracleSelection::Kind::synthetic;
            auto& s = cfg.oracle.synthetic;
            read_opt(o, "gen_noise", s.gen_noise);
            read_opt(o, "disc_noise", s.disc_noise);
            read_opt(o, "gen_bias", s.gen_bias);
            read_opt(o, "disc_bias", s.disc_bias);
            read_opt(o, "sharpness", s.sharpness);
            read_opt(o, "temperature", s.temperature);
        } else if (kind == "remote") {
            cfg.oracle.kind = OracleSelection::Kind::remote;
            auto& r = cfg.oracle.remote;
            read_opt(o, "base_url", r.base_url);
            read_opt(o, "path", r.path);
            read_opt(o, "model", r.model);
            read_opt(o, "temperature", r.temperature);
            read_opt(o, "samples", r.samples);
            read_opt(o, "timeout_s", r.timeout_s);
            read_opt(o, "max_in_flight", r.max_in_flight);
            read_opt(o, "max_retries", r.max_retries);
        } else {
            throw ConfigError("unknown oracle kind '" + kind + "'");
        }
    }
    if (doc.contains("agent")) {
        const auto& a = doc.at("agent");
        check_keys(a,
                   {"fov_deg", "range_m", "sensor_noise", "frontier_policy", "replan_interval", "samples",
                    "stop_distance_m", "context_objects"},
                   "agent");
        read_opt(a, "fov_deg", cfg.agent.sensor.fov_deg);
        read_opt(a, "range_m", cfg.agent.sensor.range_m);
        read_opt(a, "sensor_noise", cfg.agent.sensor_noise);
        read_opt(a, "replan_interval", cfg.agent.replan_interval);
        read_opt(a, "samples", cfg.agent.samples);
        read_opt(a, "stop_distance_m", cfg.agent.stop_distance_m);
        read_opt(a, "context_objects", cfg.agent.context_objects);
        if (a.contains("frontier_policy")) {
            const auto p = a.at("frontier_policy").get<std::string>();
            if (p == "semantic") {
                cfg.agent.frontier_policy = FrontierPolicy::semantic;
            } else if (p == "nearest") {
                cfg.agent.frontier_policy = FrontierPolicy::nearest;
            } else {
                throw ConfigError("unknown frontier_policy '" + p + "'");
            }
        }
    }
    if (doc.contains("equilibrium")) {
        const auto& e = doc.at("equilibrium");
        check_keys(e, {"eta_g", "eta_d", "lambda_g", "lambda_d", "iters", "bias", "early_exit"}, "equilibrium");
        auto& q = cfg.agent.equilibrium;
        read_opt(e, "eta_g", q.eta_g);
        read_opt(e, "eta_d", q.eta_d);
        read_opt(e, "lambda_g", q.lambda_g);
        read_opt(e, "lambda_d", q.lambda_d);
        read_opt(e, "iters", q.iters);
        read_opt(e, "bias", q.bias);
        read_opt(e, "early_exit", q.early_exit);
    }
    if (doc.contains("exploration")) {
        const auto& x = doc.at("exploration");
        check_keys(x, {"lambda_cu", "bound", "cand_tentative", "cand_confirm", "approach_distance_m"}, "exploration");
        auto& ex = cfg.agent.exploration;
        read_opt(x, "lambda_cu", ex.lambda_cu);
        read_opt(x, "cand_tentative", ex.cand_tentative);
        read_opt(x, "cand_confirm", ex.cand_confirm);
        read_opt(x, "approach_distance_m", ex.approach_distance_m);
        if (x.contains("bound")) {
            std::array<double, 2> b{};
            read_opt(x, "bound", b);
            ex.bound = {b[0], b[1]};
        }
    }
    return cfg;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return run_config_from_json(doc, path.parent_path());
}

MetricsSummary compute_metrics(const std::vector<EpisodeResult>& results) {
    if (results.empty()) throw EmptyBatch("no episode results to summarize");
    auto summarize = [](const std::vector<const EpisodeResult*>& rs, std::string name) {
        MetricsSummary m;
        m.variant = std::move(name);
        m.n = rs.size();
        for (const auto* r : rs) {
            const double s = r->success ? 1.0 : 0.0;
            m.sr += s;
            m.spl += s * r->shortest_m / std::max(r->shortest_m, r->path_m);
            m.dtg_mean += r->dtg_m;
        }
        const double n = static_cast<double>(rs.size());
        m.sr /= n;
        m.spl /= n;
        m.dtg_mean /= n;
        return m;
    };

    std::map<std::string, std::vector<const EpisodeResult*>> groups;
    std::vector<const EpisodeResult*> all;
    for (const auto& r : results) {
        groups[std::string(to_string(r.variant))].push_back(&r);
        all.push_back(&r);
    }
    MetricsSummary out = summarize(all, groups.size() == 1 ? groups.begin()->first : "mixed");
    for (const auto& [name, rs] : groups) out.per_variant[name] = summarize(rs, name);
    return out;
}

json summary_to_json(const MetricsSummary& m) {
    json doc = {{"variant", m.variant}, {"n", m.n}, {"sr", m.sr}, {"spl", m.spl}, {"dtg_mean", m.dtg_mean}};
    if (m.per_variant.size() > 1) {
        json per = json::object();
        for (const auto& [name, sub] : m.per_variant) per[name] = summary_to_json(sub);
        doc["per_variant"] = per;
    }
    return doc;
}

std::optional<int> modal_answer(std::span<const double> counts) {
    std::optional<int> best;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] > 0.0 && (!best || counts[i] > counts[*best])) best = static_cast<int>(i);
    }
    return best;
}

namespace {

std::vector<double> channel_weights(Oracle& oracle, const CandidatePack& pack, OracleMode mode, int samples,
                                    Rng& rng) {
    auto exact = mode == OracleMode::generative ? oracle.generative_weights(pack) : oracle.discriminative_weights(pack);
    if (exact) return *exact;
    return estimate_distribution(oracle, pack, samples, mode, rng);
}

std::optional<int> as_choice(std::size_t index, const CandidatePack& pack) {
    if (index >= pack.candidates.size()) return std::nullopt;
    return static_cast<int>(index);
}

}  // namespace

Identification identify_with_variant(Variant variant, const CandidatePack& pack, Oracle& oracle,
                                     const EquilibriumConfig& eq, int samples, Rng& rng) {
    validate_pack(pack);
    Identification out;
    switch (variant) {
        case Variant::clip_only: {
            std::size_t best = 0;
            for (std::size_t i = 1; i < pack.candidates.size(); ++i) {
                if (pack.candidates[i].similarity > pack.candidates[best].similarity) best = i;
            }
            out.choice = static_cast<int>(best);
            break;
        }
        case Variant::generator_only: {
            const auto gen = channel_weights(oracle, pack, OracleMode::generative, samples, rng);
            const auto pair = init_policies(gen, gen, eq.bias);
            const auto init = pair.generator.probs();
            const auto best = std::max_element(init.begin(), init.end()) - init.begin();
            out.choice = as_choice(static_cast<std::size_t>(best), pack);
            break;
        }
        case Variant::ranking: {
            const auto counts = estimate_distribution(oracle, pack, samples, OracleMode::generative, rng);
            const auto mode = modal_answer(counts);
            out.choice = mode ? as_choice(static_cast<std::size_t>(*mode), pack) : std::nullopt;
            break;
        }
        case Variant::game: {
            const auto gen = channel_weights(oracle, pack, OracleMode::generative, samples, rng);
            const auto disc = channel_weights(oracle, pack, OracleMode::discriminative, samples, rng);
            auto result = run_equilibrium(init_policies(gen, disc, eq.bias), eq);
            out.choice = select_target(result.final_pair);
            out.game = std::move(result);
            break;
        }
    }
    return out;
}

double shortest_path_length(const Episode& episode) {
    const GridScene& scene = *episode.scene;
    const double cs = scene.cell_size;
    Grid<std::uint8_t> blocked(scene.width, scene.height, 0);
    for (std::size_t i = 0; i < blocked.size(); ++i) {
        blocked.data()[i] = scene.occupancy.data()[i] == Occupancy::obstacle ? 1 : 0;
    }
    const Cell start = cell_of(episode.start.position(), cs);
    const Cell goals[] = {start};
    const auto field = fmm_field(blocked, goals, cs);

    double best = kInf;
    for (int id : episode.query.goal_object_ids) {
        const auto* obj = scene.find_object(id);
        if (!obj) continue;
        const Cell c = cell_of(obj->centroid, cs);
        if (field.reachable(c)) {
            best = std::min(best, field.at(c));
        } else {
            for (const auto& f : obj->footprint) {
                if (field.reachable(f)) best = std::min(best, field.at(f) + distance(cell_center(f, cs), obj->centroid));
            }
        }
    }
    if (!(best < kInf)) return cs;
    return std::max(cs, best - episode.success_radius);
}

namespace {

std::unique_ptr<Oracle> default_oracle(const RunConfig& cfg, const Episode& ep, std::uint64_t seed,
                                       const std::shared_ptr<RequestLimiter>& limiter) {
    if (cfg.oracle.kind == OracleSelection::Kind::remote) {
        return std::make_unique<RemoteOracle>(cfg.oracle.remote, limiter);
    }
    SyntheticOracleConfig sc = cfg.oracle.synthetic;
    sc.seed = mix_seed(seed, 11);
    return std::make_unique<SyntheticOracle>(ep.scene, sc);
}

CandidatePack build_pack(const Query& query, const std::vector<int>& map_ids, const ObjectCentricMap& objects,
                         const std::vector<std::string>& vocabulary, double cs, int context_objects) {
    CandidatePack pack;
    pack.query = query;
    for (std::size_t i = 0; i < map_ids.size(); ++i) {
        const MapObject* obj = objects.find(map_ids[i]);
        CandidateView view;
        view.id = static_cast<int>(i);
        view.top_down = obj->embedding;
        view.first_person = obj->closest_view.empty() ? obj->embedding : obj->closest_view;
        view.label = classify(obj->embedding, vocabulary);
        view.centroid = obj->centroid(cs);
        view.similarity = obj->query_similarity.value_or(0.0);
        view.source_object = obj->majority_source();

        std::vector<std::pair<double, const MapObject*>> near;
        for (const auto& other : objects.objects) {
            if (other.map_id == obj->map_id) continue;
            near.emplace_back(distance(view.centroid, other.centroid(cs)), &other);
        }
        std::sort(near.begin(), near.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first < b.first : a.second->map_id < b.second->map_id;
        });
        for (int k = 0; k < context_objects && k < static_cast<int>(near.size()); ++k) {
            const Vec2 p = near[k].second->centroid(cs);
            const double bearing = std::atan2(p.y - view.centroid.y, p.x - view.centroid.x) * 180.0 / std::numbers::pi;
            view.context.push_back({classify(near[k].second->embedding, vocabulary), normalize_heading(bearing),
                                    near[k].first});
        }
        pack.candidates.push_back(std::move(view));
    }
    return pack;
}

std::vector<Cell> free_cells(const std::vector<Cell>& cells, const Grid<std::uint8_t>& blocked) {
    std::vector<Cell> out;
    for (const auto& c : cells) {
        if (blocked.in_bounds(c) && !blocked[c]) out.push_back(c);
    }
    return out;
}

bool frontier_has(const std::vector<Frontier>& frontiers, Cell c) {
    for (const auto& f : frontiers) {
        if (std::binary_search(f.cells.begin(), f.cells.end(), c)) return true;
    }
    return false;
}

std::size_t pick_frontier(const std::vector<Frontier>& open, const std::vector<FrontierScore>& scores,
                          const AgentConfig& ac) {
    if (ac.frontier_policy == FrontierPolicy::semantic) {
        return select_frontier(open, scores, ac.exploration.bound).index;
    }
    std::size_t pick = 0;
    for (std::size_t i = 1; i < open.size(); ++i) {
        if (scores[i].geodesic < scores[pick].geodesic ||
            (scores[i].geodesic == scores[pick].geodesic && open[i].centroid_cell() < open[pick].centroid_cell())) {
            pick = i;
        }
    }
    return pick;
}

}  // namespace

EpisodeResult run_episode(const RunConfig& cfg, const Episode& episode, std::uint64_t seed,
                          const StepObserver& observer, const OracleFactory& oracle_factory) {
    const auto wall_start = std::chrono::steady_clock::now();
    const GridScene& scene = *episode.scene;
    const double cs = scene.cell_size;
    const AgentConfig& ac = cfg.agent;
    const int budget = cfg.max_steps.value_or(episode.max_steps);

    auto oracle = oracle_factory ? oracle_factory(episode, seed) : default_oracle(cfg, episode, seed, nullptr);
    Rng rng(mix_seed(seed, 7));
    const Embedding query_emb =
        compose_embedding(episode.query.main_goal.category, episode.query.main_goal.attributes, scene.embedding_dim);
    const auto vocabulary = scene.categories();
    const bool relational = episode.query.has_relations();

    ExplorationMap expl(scene.width, scene.height);
    ObjectCentricMap objects;
    SimilarityGrids grids(scene.width, scene.height);
    CandidateList candidates;
    Grid<std::uint8_t> bumps(scene.width, scene.height, 0);
    std::set<Cell> failed_anchors;
    std::optional<Cell> frontier_anchor;
    int since_select = 0;
    int scan_turns = 0;

    EpisodeResult result;
    result.episode_id = episode.id;
    result.variant = cfg.variant;
    result.seed = seed;
    result.shortest_m = shortest_path_length(episode);

    AgentPose pose = episode.start;
    std::vector<Frontier> frontiers;
    bool finished = false;
    while (!finished) {
        if (result.steps >= budget) {
            result.termination = Termination::step_limit;
            break;
        }

        const Observation obs =
            observe(scene, pose, ac.sensor, {ac.sensor_noise, mix_seed(seed, 1000 + result.steps)});
        update_exploration(expl, obs);
        integrate(objects, obs, pose, ac.mapping);
        refresh_similarity(objects, query_emb);
        paint_object_similarity(grids, objects, query_emb);
        accumulate_image_similarity(grids, make_frame_record(obs), query_emb);

        const auto upd = candidates.update(objects, ac.exploration, relational);
        bool event = !upd.new_tentative.empty() || !upd.new_pending.empty() || !upd.new_confirmed.empty();

        Identification ident;
        bool identified = false;
        const auto pending = candidates.with_status(CandidateStatus::pending_identification);
        if (!pending.empty() && !candidates.confirmed()) {
            const auto pack = build_pack(episode.query, pending, objects, vocabulary, cs, ac.context_objects);
            ident = identify_with_variant(cfg.variant, pack, *oracle, ac.equilibrium, ac.samples, rng);
            identified = true;
            ++result.identifications;
            for (std::size_t i = 0; i < pending.size(); ++i) {
                if (ident.choice && static_cast<std::size_t>(*ident.choice) == i) {
                    candidates.confirm(pending[i]);
                } else {
                    candidates.reject(pending[i]);
                }
            }
            event = true;
        }

        Grid<std::uint8_t> blocked = expl.obstacle;
        for (std::size_t i = 0; i < blocked.size(); ++i) blocked.data()[i] |= bumps.data()[i];
        const Cell here = cell_of(pose.position(), cs);

        std::vector<Cell> goal_cells;
        Vec2 toward;
        std::optional<int> approaching;
        bool stop_now = false;
        bool to_frontier = false;
        bool look_around = false;

        if (const auto target = candidates.confirmed()) {
            const MapObject* obj = objects.find(*target);
            toward = obj->centroid(cs);
            if (distance(pose.position(), toward) <= ac.stop_distance_m) {
                stop_now = true;
            } else {
                goal_cells = free_cells(obj->footprint, blocked);
            }
        }
        if (!stop_now && goal_cells.empty()) {
            std::vector<const CandidateTarget*> open;
            for (const auto& c : candidates.items()) {
                if (c.status == CandidateStatus::tentative && !c.approached) open.push_back(&c);
            }
            std::stable_sort(open.begin(), open.end(), [](const auto* a, const auto* b) {
                return a->similarity > b->similarity;
            });
            for (const auto* c : open) {
                const MapObject* obj = objects.find(c->map_id);
                const Vec2 centre = obj->centroid(cs);
                auto cells = free_cells(obj->footprint, blocked);
                if (distance(pose.position(), centre) <= ac.exploration.approach_distance_m || cells.empty()) {
                    candidates.mark_approached(c->map_id);
                    continue;
                }
                goal_cells = std::move(cells);
                toward = centre;
                approaching = c->map_id;
                break;
            }
        }
        if (!stop_now && goal_cells.empty()) {
            frontiers = extract_frontiers(expl, ac.mapping);
            const bool lost = frontier_anchor && !frontier_has(frontiers, *frontier_anchor);
            const bool reached = frontier_anchor && std::max(std::abs(here.x - frontier_anchor->x),
                                                             std::abs(here.y - frontier_anchor->y)) <= 2;
            if (!frontier_anchor || event || lost || reached || since_select >= ac.replan_interval) {
                if (reached) failed_anchors.insert(*frontier_anchor);
                frontier_anchor.reset();
                const Cell origin[] = {here};
                const auto from_agent = fmm_field(blocked, origin, cs);
                std::vector<Frontier> open;
                std::vector<FrontierScore> scores;
                for (const auto& f : frontiers) {
                    if (failed_anchors.count(f.anchor) || !from_agent.reachable(f.anchor)) continue;
                    FrontierScore s;
                    s.geodesic = from_agent.at(f.anchor);
                    s.geo = score_geometry(f, expl, from_agent, ac.exploration.lambda_cu,
                                           ac.exploration.window_utility_m);
                    const auto sem = score_semantic(f, grids, ac.exploration.window_semantic_cells);
                    s.sem_obj = sem.sem_obj;
                    s.sem_img = sem.sem_img;
                    open.push_back(f);
                    scores.push_back(s);
                }
                if (open.empty()) {
                    // Turn a full circle in place before giving up.
                    if (scan_turns * kTurnDegrees >= 360.0) {
                        result.termination = Termination::no_frontier;
                        break;
                    }
                    look_around = true;
                }
                if (!look_around) {
                    frontier_anchor = open[pick_frontier(open, scores, ac)].anchor;
                    since_select = 0;
                    scan_turns = 0;
                }
            }
            if (frontier_anchor) {
                goal_cells = {*frontier_anchor};
                toward = cell_center(*frontier_anchor, cs);
                to_frontier = true;
            }
        }

        Action action = Action::stop;
        if (look_around) {
            action = Action::turn_left;
            ++scan_turns;
        } else if (!stop_now) {
            std::optional<Vec2> waypoint;
            try {
                const auto field = fmm_field(blocked, goal_cells, cs);
                waypoint = progress_waypoint(field, blocked, pose, toward);
            } catch (const GoalBlocked&) {
            }
            if (waypoint) {
                action = next_action(pose, *waypoint, false, ac.planning.heading_tol_deg);
            } else {
                // Goal reached or unreachable under the current map: drop it and look around.
                if (to_frontier && frontier_anchor) {
                    failed_anchors.insert(*frontier_anchor);
                    frontier_anchor.reset();
                } else if (approaching) {
                    candidates.mark_approached(*approaching);
                }
                action = Action::turn_left;
            }
        }

        const AgentPose next = step(scene, pose, action);
        if (action == Action::move_forward && next == pose) {
            const Cell hit = cell_of(forward_point(pose, cs), cs);
            if (bumps.in_bounds(hit)) bumps[hit] = 1;
        }
        result.path_m += distance(pose.position(), next.position());
        pose = next;
        ++result.steps;
        ++since_select;
        if (!result.first_candidate_step) {
            for (const auto& c : candidates.items()) {
                const Vec2 centre = objects.find(c.map_id)->centroid(cs);
                if (distance(pose.position(), centre) <= ac.exploration.approach_distance_m) {
                    result.first_candidate_step = result.steps;
                    break;
                }
            }
        }

        if (observer) {
            StepSnapshot snap;
            snap.step = result.steps;
            snap.pose = pose;
            snap.action = action;
            snap.exploration = &expl;
            snap.objects = &objects;
            snap.frontiers = &frontiers;
            snap.candidates = &candidates;
            snap.identification = identified ? &ident : nullptr;
            observer(snap);
        }

        if (action == Action::stop) {
            result.success = check_success(pose, episode);
            result.termination = result.success ? Termination::stopped_success : Termination::stopped_wrong;
            finished = true;
        }
    }

    result.dtg_m = distance_to_goal(scene, episode.query, pose.position()).value_or(0.0);
    if (cfg.record_wall_time) {
        result.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - wall_start).count();
    }
    return result;
}

std::uint64_t episode_seed(std::uint64_t master_seed, std::size_t index) {
    return master_seed ^ static_cast<std::uint64_t>(index);
}

BatchOutcome run_episodes(const RunConfig& cfg, const std::vector<Episode>& episodes,
                          const OracleFactory& oracle_factory) {
    std::shared_ptr<RequestLimiter> limiter;
    if (cfg.oracle.kind == OracleSelection::Kind::remote) {
        limiter = std::make_shared<RequestLimiter>(cfg.oracle.remote.max_in_flight);
    }
    const OracleFactory factory = oracle_factory ? oracle_factory : [&](const Episode& ep, std::uint64_t seed) {
        return default_oracle(cfg, ep, seed, limiter);
    };

    const std::size_t n = episodes.size();
    std::vector<std::optional<EpisodeResult>> slots(n);
    std::vector<std::string> failures(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                slots[i] = run_episode(cfg, episodes[i], episode_seed(cfg.master_seed, i), {}, factory);
            } catch (const std::exception& e) {
                failures[i] = episodes[i].id + ": " + e.what();
            }
        }
    };
    const int threads = std::max(1, std::min<int>(cfg.parallel, static_cast<int>(n)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    BatchOutcome out;
    for (std::size_t i = 0; i < n; ++i) {
        if (slots[i]) out.results.push_back(std::move(*slots[i]));
        if (!failures[i].empty()) out.errors.push_back(failures[i]);
    }
    if (!out.results.empty()) out.summary = compute_metrics(out.results);
    return out;
}

BatchOutcome run_batch(const RunConfig& cfg, const OracleFactory& oracle_factory) {
    cfg.validate();
    std::vector<Episode> episodes;
    for (const auto& path : cfg.episodes) {
        if (!fs::exists(path)) throw ConfigError("episode file not found: " + path.string());
        try {
            episodes.push_back(load_episode(path));
        } catch (const Error& e) {
            throw ConfigError("episode " + path.string() + ": " + e.what());
        }
    }

    auto out = run_episodes(cfg, episodes, oracle_factory);

    fs::create_directories(cfg.out_dir);
    {
        std::ofstream csv(cfg.out_dir / "results.csv", std::ios::binary);
        write_results_csv(csv, out.results);
    }
    if (out.summary) {
        std::ofstream js(cfg.out_dir / "summary.json", std::ios::binary);
        js << summary_to_json(*out.summary).dump(2) << '\n';
    }
    if (!out.errors.empty()) {
        std::ofstream err(cfg.out_dir / "errors.txt", std::ios::binary);
        for (const auto& e : out.errors) err << e << '\n';
    }
    return out;
}

namespace {

const char* kCsvHeader = "episode_id,variant,seed,success,steps,l_i,p_i,dtg,termination,wall_ms";

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

// Double-quoted fields may contain commas; "" is a literal quote.
std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c != '"') {
                out.back() += c;
            } else if (i + 1 < line.size() && line[i + 1] == '"') {
                out.back() += '"';
                ++i;
            } else {
                quoted = false;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.emplace_back();
        } else {
            out.back() += c;
        }
    }
    return out;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

}  // namespace

void write_results_csv(std::ostream& out, const std::vector<EpisodeResult>& results) {
    out << kCsvHeader << '\n';
    for (const auto& r : results) {
        out << csv_field(r.episode_id) << ',' << to_string(r.variant) << ',' << r.seed << ',' << (r.success ? 1 : 0) << ','
            << r.steps << ',' << fmt6(r.shortest_m) << ',' << fmt6(r.path_m) << ',' << fmt6(r.dtg_m) << ','
            << to_string(r.termination) << ',' << fmt6(r.wall_ms) << '\n';
    }
}

std::vector<EpisodeResult> read_results_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("results file is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) throw ConfigError("results file has an unexpected header");
    std::vector<EpisodeResult> out;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 10) throw ConfigError("results row " + std::to_string(row) + " has the wrong column count");
        try {
            EpisodeResult r;
            r.episode_id = f[0];
            r.variant = parse_variant(f[1]);
            r.seed = std::stoull(f[2]);
            r.success = f[3] == "1";
            r.steps = std::stoi(f[4]);
            r.shortest_m = std::stod(f[5]);
            r.path_m = std::stod(f[6]);
            r.dtg_m = std::stod(f[7]);
            r.termination = parse_termination(f[8]);
            r.wall_ms = std::stod(f[9]);
            out.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw ConfigError("results row " + std::to_string(row) + " is malformed");
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Procedural suite

namespace {

struct RoomRect {
    int x0, y0, x1, y1;  // inclusive interior bounds
};

struct RelationPair {
    const char* target;
    const char* reference;
    const char* context;
};

constexpr RelationPair kPairs[] = {
    {"chair", "desk", "office"},         {"monitor", "bookshelf", "office"},
    {"microwave", "fridge", "kitchen"},  {"sink", "oven", "kitchen"},
    {"lamp", "bed", "bedroom"},          {"nightstand", "wardrobe", "bedroom"},
    {"armchair", "tv", "living"},        {"potted_plant", "sofa", "living"},
};

const std::vector<std::string>& context_fillers(const std::string& context) {
    static const std::map<std::string, std::vector<std::string>> table = {
        {"office", {"desk", "bookshelf", "monitor", "chair"}},
        {"kitchen", {"fridge", "oven", "sink", "microwave", "dining_table"}},
        {"bedroom", {"bed", "wardrobe", "nightstand", "lamp"}},
        {"living", {"sofa", "tv", "coffee_table", "armchair", "potted_plant"}},
    };
    return table.at(context);
}

constexpr const char* kAttributes[] = {"red", "wooden", "white", "black", "small"};

class SuiteBuilder {
public:
    SuiteBuilder(std::uint64_t seed, int index) : rng_(seed), index_(index) {}

    std::optional<Episode> build(const SuiteOptions& opts);

private:
    bool footprint_free(const std::vector<Cell>& fp) const;
    std::optional<int> place(const std::string& category, std::vector<std::string> attrs, const RoomRect& room,
                             const std::function<bool(Vec2)>& accept, int tries = 200);

    Rng rng_;
    int index_;
    GridScene scene_;
    Grid<std::uint8_t> taken_;
};

bool SuiteBuilder::footprint_free(const std::vector<Cell>& fp) const {
    for (const auto& c : fp) {
        if (!scene_.is_free(c)) return false;
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                const Cell n{c.x + dx, c.y + dy};
                if (taken_.in_bounds(n) && taken_[n]) return false;
            }
        }
    }
    return true;
}

std::optional<int> SuiteBuilder::place(const std::string& category, std::vector<std::string> attrs,
                                       const RoomRect& room, const std::function<bool(Vec2)>& accept, int tries) {
    for (int t = 0; t < tries; ++t) {
        const int x = room.x0 + 1 + static_cast<int>(rng_.below(static_cast<std::uint64_t>(room.x1 - room.x0 - 2)));
        const int y = room.y0 + 1 + static_cast<int>(rng_.below(static_cast<std::uint64_t>(room.y1 - room.y0 - 2)));
        const std::vector<Cell> fp = {{x, y}, {x + 1, y}, {x, y + 1}, {x + 1, y + 1}};
        if (!footprint_free(fp)) continue;
        const Vec2 centre{(x + 1) * scene_.cell_size, (y + 1) * scene_.cell_size};
        if (accept && !accept(centre)) continue;
        const int id = static_cast<int>(scene_.objects.size());
        scene_.objects.push_back(make_scene_object(id, category, std::move(attrs), fp, rng_.next_u64(),
                                                   scene_.cell_size, scene_.embedding_dim));
        for (const auto& c : fp) taken_[c] = 1;
        return id;
    }
    return std::nullopt;
}

std::optional<Episode> SuiteBuilder::build(const SuiteOptions& opts) {
    // Six rooms in a 3 x 2 layout joined by wide doors.
    constexpr int kCols = 3;
    constexpr int kRows = 2;
    constexpr int kRoom = 14;  // interior cells per side
    constexpr int kDoor = 7;
    constexpr int W = kCols * (kRoom + 1) + 1;
    constexpr int H = kRows * (kRoom + 1) + 1;
    scene_.width = W;
    scene_.height = H;
    scene_.occupancy = Grid<Occupancy>(W, H, Occupancy::free);
    taken_ = Grid<std::uint8_t>(W, H, 0);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            if (x % (kRoom + 1) == 0 || y % (kRoom + 1) == 0) scene_.occupancy(x, y) = Occupancy::obstacle;
        }
    }
    auto mark = [&](int x, int y) {
        if (taken_.in_bounds(x, y)) taken_(x, y) = 1;
    };
    auto door_offset = [&] { return 1 + static_cast<int>(rng_.below(kRoom - kDoor)); };
    // Vertical walls between horizontally adjacent rooms.
    for (int r = 0; r < kRows; ++r) {
        for (int c = 1; c < kCols; ++c) {
            const int x = c * (kRoom + 1);
            const int y0 = r * (kRoom + 1) + door_offset();
            for (int k = 0; k < kDoor; ++k) {
                scene_.occupancy(x, y0 + k) = Occupancy::free;
                for (int s = -2; s <= 2; ++s) mark(x + s, y0 + k);
            }
        }
    }
    // Horizontal walls between vertically adjacent rooms.
    for (int c = 0; c < kCols; ++c) {
        for (int r = 1; r < kRows; ++r) {
            const int y = r * (kRoom + 1);
            const int x0 = c * (kRoom + 1) + door_offset();
            for (int k = 0; k < kDoor; ++k) {
                scene_.occupancy(x0 + k, y) = Occupancy::free;
                for (int s = -2; s <= 2; ++s) mark(x0 + k, y + s);
            }
        }
    }

    std::vector<RoomRect> rooms;
    for (int r = 0; r < kRows; ++r) {
        for (int c = 0; c < kCols; ++c) {
            const int x0 = c * (kRoom + 1) + 1;
            const int y0 = r * (kRoom + 1) + 1;
            rooms.push_back({x0, y0, x0 + kRoom - 1, y0 + kRoom - 1});
        }
    }
    const int n_rooms = static_cast<int>(rooms.size());

    const auto& pair = kPairs[rng_.below(std::size(kPairs))];
    const std::string target_cat = pair.target;
    const std::string ref_cat = pair.reference;

    // Two rooms share the target's context; the rest draw from the others.
    std::vector<int> order(n_rooms);
    for (int i = 0; i < n_rooms; ++i) order[i] = i;
    for (int i = n_rooms - 1; i > 0; --i) std::swap(order[i], order[rng_.below(i + 1)]);
    const int target_room = order[0];
    const int twin_room = order[1];
    std::vector<std::string> others;
    for (const char* c : {"office", "kitchen", "bedroom", "living"}) {
        if (c != std::string(pair.context)) others.push_back(c);
    }
    std::vector<std::string> contexts(n_rooms);
    contexts[target_room] = pair.context;
    contexts[twin_room] = pair.context;
    for (int i = 2; i < n_rooms; ++i) contexts[order[i]] = others[(i - 2) % others.size()];
    const int start_room = order[2 + rng_.below(n_rooms - 2)];

    std::vector<std::string> attrs;
    if (rng_.uniform() < 0.5) attrs.push_back(kAttributes[rng_.below(std::size(kAttributes))]);

    const auto ref = place(ref_cat, {}, rooms[target_room], {});
    if (!ref) return std::nullopt;
    const Vec2 ref_c = scene_.objects[*ref].centroid;
    const auto target = place(target_cat, attrs, rooms[target_room],
                              [&](Vec2 p) { return distance(p, ref_c) <= 1.6 && distance(p, ref_c) >= 0.7; });
    if (!target) return std::nullopt;

    // Context furniture, never another instance of the reference or target category.
    for (int r = 0; r < n_rooms; ++r) {
        const auto& fill = context_fillers(contexts[r]);
        int placed = 0;
        for (int attempt = 0; attempt < 10 && placed < 2; ++attempt) {
            const auto& cat = fill[rng_.below(fill.size())];
            if (cat == ref_cat || cat == target_cat) continue;
            if (place(cat, {}, rooms[r], {})) ++placed;
        }
    }

    Query query;
    query.main_goal = {target_cat, attrs};
    query.relations.push_back({"near", {ref_cat}});
    query.goal_object_ids = {*target};
    std::string text = "the ";
    for (const auto& a : attrs) text += a + " ";
    text += target_cat + " near the " + ref_cat;
    query.raw_text = text;

    // Distractors live in the two rooms of the target's context.
    auto far_from_ref = [&](Vec2 p) { return distance(p, ref_c) > 2.6; };
    const int want = opts.min_distractors + static_cast<int>(rng_.below(
                                                static_cast<std::uint64_t>(opts.max_distractors - opts.min_distractors + 1)));
    int placed = 0;
    for (int attempt = 0; attempt < 20 && placed < want; ++attempt) {
        const int r = (attempt % 3 == 2) ? target_room : twin_room;
        if (place(target_cat, attrs, rooms[r], far_from_ref)) ++placed;
    }
    if (placed < opts.min_distractors) return std::nullopt;

    for (const auto& o : scene_.objects) {
        const double s = relation_truth_score(scene_, o, query);
        if (o.id == *target ? s < 1.0 : s >= 1.0) return std::nullopt;
    }

    const RoomRect& sr = rooms[start_room];
    std::optional<Cell> start;
    for (int t = 0; t < 200 && !start; ++t) {
        const Cell c{sr.x0 + 1 + static_cast<int>(rng_.below(sr.x1 - sr.x0 - 1)),
                     sr.y0 + 1 + static_cast<int>(rng_.below(sr.y1 - sr.y0 - 1))};
        if (scene_.is_free(c) && !taken_[c]) start = c;
    }
    if (!start) return std::nullopt;

    validate_scene(scene_);
    Episode ep;
    char id[32];
    std::snprintf(id, sizeof id, "suite_%03d", index_);
    ep.id = id;
    ep.scene = std::make_shared<const GridScene>(scene_);
    ep.query = std::move(query);
    const Vec2 p = cell_center(*start, scene_.cell_size);
    ep.start = {p.x, p.y, static_cast<double>(30 * rng_.below(12))};
    return ep;
}

}  // namespace

std::vector<Episode> generate_suite(const SuiteOptions& opts) {
    if (opts.episodes < 1) throw ConfigError("suite needs at least one episode");
    if (opts.min_distractors < 0 || opts.max_distractors < opts.min_distractors) {
        throw ConfigError("invalid distractor range");
    }
    std::vector<Episode> out;
    for (int i = 0; i < opts.episodes; ++i) {
        for (std::uint64_t attempt = 0;; ++attempt) {
            if (attempt > 1000) throw ConfigError("suite generator could not place episode " + std::to_string(i));
            SuiteBuilder builder(mix_seed(opts.seed, (static_cast<std::uint64_t>(i) << 16) + attempt), i);
            if (auto ep = builder.build(opts)) {
                out.push_back(std::move(*ep));
                break;
            }
        }
    }
    return out;
}

void write_suite(const std::vector<Episode>& suite, const fs::path& dir, const RunConfig& base) {
    fs::create_directories(dir / "scenes");
    fs::create_directories(dir / "episodes");
    json episodes = json::array();
    for (const auto& ep : suite) {
        const std::string scene_name = ep.id + ".json";
        {
            std::ofstream out(dir / "scenes" / scene_name, std::ios::binary);
            out << scene_to_json(*ep.scene).dump() << '\n';
        }
        {
            std::ofstream out(dir / "episodes" / scene_name, std::ios::binary);
            out << episode_to_json(ep, "../scenes/" + scene_name).dump(2) << '\n';
        }
        episodes.push_back("episodes/" + scene_name);
    }
    const auto& s = base.oracle.synthetic;
    json cfg = {{"episodes", episodes},
                {"variant", std::string(to_string(base.variant))},
                {"seed", base.master_seed},
                {"parallel", base.parallel},
                {"out_dir", "results"},
                {"oracle",
                 {{"kind", "synthetic"},
                  {"gen_noise", s.gen_noise},
                  {"disc_noise", s.disc_noise},
                  {"gen_bias", s.gen_bias},
                  {"disc_bias", s.disc_bias},
                  {"sharpness", s.sharpness}}},
                {"agent", {{"sensor_noise", base.agent.sensor_noise}}}};
    std::ofstream out(dir / "config.json", std::ios::binary);
    out << cfg.dump(2) << '\n';
}

}  // namespace vlngame
