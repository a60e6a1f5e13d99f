#pragma once

#include "vlngame/equilibrium.hpp"
#include "vlngame/exploration.hpp"
#include "vlngame/mapping.hpp"
#include "vlngame/oracles.hpp"
#include "vlngame/planning.hpp"
#include "vlngame/world.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vlngame {

enum class Variant { clip_only, generator_only, ranking, game };
std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);  // throws ConfigError

enum class FrontierPolicy { semantic, nearest };

enum class Termination { stopped_success, stopped_wrong, step_limit, no_frontier };
std::string_view to_string(Termination t);
Termination parse_termination(std::string_view s);

struct AgentConfig {
    SensorConfig sensor;
    double sensor_noise = 0.05;  // descriptor rotation, radians per meter
    MappingConfig mapping;
    ExplorationConfig exploration;
    PlanningConfig planning;
    EquilibriumConfig equilibrium;
    FrontierPolicy frontier_policy = FrontierPolicy::semantic;
    int replan_interval = 10;     // steps between frontier re-selection
    int samples = 5;              // oracle draws for ranking and remote estimates
    double stop_distance_m = 0.5;  // stop this close to a confirmed target's map centroid
    int context_objects = 4;      // nearby categories listed per candidate
};

struct OracleSelection {
    enum class Kind { synthetic, remote } kind = Kind::synthetic;
    SyntheticOracleConfig synthetic;  // seed is derived per episode
    RemoteOracleConfig remote;
};

struct RunConfig {
    std::vector<std::filesystem::path> episodes;
    Variant variant = Variant::game;
    OracleSelection oracle;
    AgentConfig agent;
    std::uint64_t master_seed = 0;
    int parallel = 1;
    std::filesystem::path out_dir = "results";
    bool record_wall_time = false;  // off keeps the CSV byte-deterministic
    std::optional<int> max_steps;   // overrides every episode's budget

    void validate() const;  // throws ConfigError
};

// Episode paths in the config are resolved relative to the config file.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);

struct EpisodeResult {
    std::string episode_id;
    Variant variant = Variant::game;
    std::uint64_t seed = 0;
    bool success = false;
    int steps = 0;
    double shortest_m = 0.0;  // l_i
    double path_m = 0.0;      // p_i
    double dtg_m = 0.0;
    Termination termination = Termination::step_limit;
    double wall_ms = 0.0;
    std::optional<int> first_candidate_step;  // first step ending within approach distance of a candidate
    int identifications = 0;
};

struct MetricsSummary {
    std::string variant;
    std::size_t n = 0;
    double sr = 0.0;
    double spl = 0.0;
    double dtg_mean = 0.0;
    std::map<std::string, MetricsSummary> per_variant;
};

// Throws EmptyBatch.
MetricsSummary compute_metrics(const std::vector<EpisodeResult>& results);
nlohmann::json summary_to_json(const MetricsSummary& m);

// Candidate index in the pack, or nullopt for "no match".
struct Identification {
    std::optional<int> choice;
    std::optional<EquilibriumResult> game;  // filled for the game variant
};

Identification identify_with_variant(Variant variant, const CandidatePack& pack, Oracle& oracle,
                                     const EquilibriumConfig& eq, int samples, Rng& rng);

// Most frequent answer, ties to the lower id; nullopt when there are no answers.
std::optional<int> modal_answer(std::span<const double> counts);

// Per-step view for trace dumps.
struct StepSnapshot {
    int step = 0;
    AgentPose pose;
    Action action = Action::stop;
    const ExplorationMap* exploration = nullptr;
    const ObjectCentricMap* objects = nullptr;
    const std::vector<Frontier>* frontiers = nullptr;
    const CandidateList* candidates = nullptr;
    const Identification* identification = nullptr;  // set on steps that ran one
};

using StepObserver = std::function<void(const StepSnapshot&)>;

// Oracle factory per episode; the default builds the configured oracle.
using OracleFactory = std::function<std::unique_ptr<Oracle>(const Episode&, std::uint64_t seed)>;

// Ground-truth shortest path length to the success region, floored at one cell.
double shortest_path_length(const Episode& episode);

EpisodeResult run_episode(const RunConfig& cfg, const Episode& episode, std::uint64_t seed,
                          const StepObserver& observer = {}, const OracleFactory& oracle_factory = {});

struct BatchOutcome {
    std::vector<EpisodeResult> results;  // episode order; aborted episodes missing
    std::vector<std::string> errors;     // "<episode id>: <message>"
    std::optional<MetricsSummary> summary;
};

// Loads every episode up front (ConfigError before any output), runs them on
// `cfg.parallel` threads and writes results.csv and summary.json to out_dir.
BatchOutcome run_batch(const RunConfig& cfg, const OracleFactory& oracle_factory = {});

// Runs already-loaded episodes without touching the filesystem.
BatchOutcome run_episodes(const RunConfig& cfg, const std::vector<Episode>& episodes,
                          const OracleFactory& oracle_factory = {});

std::uint64_t episode_seed(std::uint64_t master_seed, std::size_t index);

void write_results_csv(std::ostream& out, const std::vector<EpisodeResult>& results);
std::vector<EpisodeResult> read_results_csv(std::istream& in);  // throws ConfigError

struct SuiteOptions {
    int episodes = 50;
    std::uint64_t seed = 0;
    int min_distractors = 2;
    int max_distractors = 3;
};

// Procedural relation-query episodes in a six-room house. The target and its
// 2-3 same-category distractors (which miss the relation) sit in the two rooms
// furnished for the target's context; the agent starts elsewhere.
std::vector<Episode> generate_suite(const SuiteOptions& opts);

// Writes scenes/, episodes/ and a config.json runnable with `run`.
void write_suite(const std::vector<Episode>& suite, const std::filesystem::path& dir, const RunConfig& base);

}  // namespace vlngame
