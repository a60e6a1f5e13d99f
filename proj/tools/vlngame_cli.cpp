// Command line entry point: run, eval, trace, generate.
#include "vlngame/errors.hpp"
#include "vlngame/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace vlngame;

namespace {

struct Overrides {
    std::string variant;
    std::optional<std::uint64_t> seed;
    std::optional<int> parallel;
    std::string out;
    std::optional<int> max_steps;
    std::string frontier_policy;
};

void apply(RunConfig& cfg, const Overrides& o) {
    if (!o.variant.empty()) cfg.variant = parse_variant(o.variant);
    if (o.seed) cfg.master_seed = *o.seed;
    if (o.parallel) cfg.parallel = *o.parallel;
    if (!o.out.empty()) cfg.out_dir = o.out;
    if (o.max_steps) cfg.max_steps = *o.max_steps;
    if (o.frontier_policy == "nearest") cfg.agent.frontier_policy = FrontierPolicy::nearest;
    if (o.frontier_policy == "semantic") cfg.agent.frontier_policy = FrontierPolicy::semantic;
}

int cmd_run(const std::string& config, const Overrides& o) {
    RunConfig cfg = load_run_config(config);
    apply(cfg, o);
    const auto out = run_batch(cfg);
    for (const auto& e : out.errors) std::cerr << "error: " << e << '\n';
    if (out.summary) std::cout << summary_to_json(*out.summary).dump(2) << '\n';
    std::cerr << "wrote " << (cfg.out_dir / "results.csv").string() << '\n';
    return out.errors.empty() ? 0 : 1;
}

int cmd_eval(const std::string& results) {
    std::ifstream in(results);
    if (!in) throw ConfigError("cannot open results file " + results);
    const auto rows = read_results_csv(in);
    std::cout << summary_to_json(compute_metrics(rows)).dump(2) << '\n';
    return 0;
}

int cmd_trace(const std::string& config, const std::string& episode_id, const Overrides& o) {
    RunConfig cfg = load_run_config(config);
    apply(cfg, o);
    cfg.validate();
    std::optional<Episode> found;
    std::size_t index = 0;
    for (std::size_t i = 0; i < cfg.episodes.size(); ++i) {
        Episode ep = load_episode(cfg.episodes[i]);
        if (ep.id == episode_id) {
            found = std::move(ep);
            index = i;
            break;
        }
    }
    if (!found) throw ConfigError("episode '" + episode_id + "' is not in the config");

    const fs::path dir = cfg.out_dir / ("trace_" + episode_id);
    fs::create_directories(dir);
    std::ofstream steps(dir / "steps.txt", std::ios::binary);
    std::ofstream objects(dir / "objects.jsonl", std::ios::binary);
    int games = 0;
    auto observer = [&](const StepSnapshot& s) {
        std::optional<Cell> agent = cell_of(s.pose.position(), found->scene->cell_size);
        steps << "step " << s.step << " action " << to_string(s.action) << " pose " << s.pose.x << ' ' << s.pose.y
              << ' ' << s.pose.heading << '\n'
              << render_exploration(*s.exploration, *s.frontiers, agent) << '\n';
        objects << nlohmann::json{{"step", s.step}, {"objects", objects_to_json(*s.objects)}}.dump() << '\n';
        if (s.identification && s.identification->game) {
            std::ofstream csv(dir / ("equilibrium_" + std::to_string(games++) + ".csv"), std::ios::binary);
            write_trace_csv(csv, s.identification->game->trace);
        }
    };
    cfg.agent.equilibrium.record_trace = true;
    const auto result = run_episode(cfg, *found, episode_seed(cfg.master_seed, index), observer);
    std::cout << "episode " << result.episode_id << ": " << to_string(result.termination) << " after "
              << result.steps << " steps, trace in " << dir.string() << '\n';
    return 0;
}

int cmd_generate(const std::string& out, const SuiteOptions& opts, const Overrides& o) {
    RunConfig base;
    base.oracle.synthetic.gen_noise = 0.5;
    base.oracle.synthetic.disc_noise = 0.5;
    base.oracle.synthetic.gen_bias = 1.0;
    base.oracle.synthetic.disc_bias = 1.0;
    base.episodes = {"placeholder"};
    apply(base, o);
    const auto suite = generate_suite(opts);
    write_suite(suite, out, base);
    std::cout << "wrote " << suite.size() << " episodes to " << out << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-shot object navigation with a generator/discriminator consensus game"};
    app.require_subcommand(1);

    Overrides o;
    std::string config;
    std::string results;
    std::string episode;
    std::string out_dir;
    SuiteOptions suite;

    auto add_overrides = [&](CLI::App* sub) {
        sub->add_option("--variant", o.variant, "clip_only | generator_only | ranking | game");
        sub->add_option("--seed", o.seed, "master seed");
        sub->add_option("--parallel", o.parallel, "worker threads");
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--max-steps", o.max_steps, "step budget override");
        sub->add_option("--frontier-policy", o.frontier_policy, "semantic | nearest")
            ->check(CLI::IsMember({"semantic", "nearest"}));
    };

    auto* run = app.add_subcommand("run", "run every episode in a config");
    run->add_option("--config", config, "run config (JSON)")->required();
    add_overrides(run);

    auto* eval = app.add_subcommand("eval", "recompute metrics from a results CSV");
    eval->add_option("--results", results, "results.csv")->required();

    auto* trace = app.add_subcommand("trace", "dump per-step map snapshots for one episode");
    trace->add_option("--config", config, "run config (JSON)")->required();
    trace->add_option("--episode", episode, "episode id")->required();
    add_overrides(trace);

    auto* gen = app.add_subcommand("generate", "write a procedural relation-query suite");
    gen->add_option("--out", out_dir, "output directory")->required();
    gen->add_option("--episodes", suite.episodes, "episode count");
    gen->add_option("--suite-seed", suite.seed, "generator seed");
    gen->add_option("--variant", o.variant, "variant written to the config");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config, o);
        if (*eval) return cmd_eval(results);
        if (*trace) return cmd_trace(config, episode, o);
        if (*gen) return cmd_generate(out_dir, suite, o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
