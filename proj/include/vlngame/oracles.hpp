#pragma once

#include "vlngame/rng.hpp"
#include "vlngame/semantics.hpp"
#include "vlngame/world.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace vlngame {

// Sources of the raw generative and discriminative weights that seed the game.

struct SpatialContext {
    std::string category;
    double bearing_deg = 0.0;  // from the candidate, counter-clockwise from +x
    double distance_m = 0.0;
};

struct CandidateView {
    int id = 0;
    Embedding first_person;
    Embedding top_down;
    std::string label;  // zero-shot category of the top-down embedding
    Vec2 centroid;      // meters, map frame
    double similarity = 0.0;  // query similarity cached by the mapper
    std::vector<SpatialContext> context;
    std::optional<int> source_object;  // ground truth, synthetic oracle only
};

struct CandidatePack {
    Query query;
    std::vector<CandidateView> candidates;

    int size() const { return static_cast<int>(candidates.size()); }
};

// Throws std::invalid_argument unless the pack is non-empty with ids 0..N-1.
void validate_pack(const CandidatePack& pack);

// Fraction of the query (category, attributes, relations) the object satisfies;
// 0 when the category differs.
double relation_truth_score(const GridScene& scene, const SceneObject& object, const Query& query);

// Truth score per candidate plus the no-match entry (1 when no candidate fully matches).
std::vector<double> truth_scores(const GridScene& scene, const CandidatePack& pack);

struct SyntheticOracleConfig {
    std::uint64_t seed = 0;
    double gen_noise = 0.0;
    double disc_noise = 0.0;
    double gen_bias = 0.0;
    double disc_bias = 0.0;
    double sharpness = 4.0;    // logit per unit of truth score
    double temperature = 1.0;  // answer sampling; 0 = argmax

    void validate() const;
};

// Raw generative weights over candidates + no-match.
std::vector<double> synthetic_generative(const CandidatePack& pack, std::span<const double> truth,
                                         const SyntheticOracleConfig& cfg);
// Raw per-option acceptance weights in (0, 1), no-match included.
std::vector<double> synthetic_discriminative(const CandidatePack& pack, std::span<const double> truth,
                                             const SyntheticOracleConfig& cfg);

enum class OracleMode { generative, discriminative };

class Oracle {
public:
    virtual ~Oracle() = default;

    // One generative answer in 0..N (N = no match); nullopt is an abstention.
    virtual std::optional<int> sample_answer(const CandidatePack& pack, Rng& rng) = 0;
    // One verdict per option; entry N is "every candidate rejected".
    virtual std::vector<std::optional<bool>> sample_verdicts(const CandidatePack& pack, Rng& rng) = 0;

    // Exact raw weights when the oracle exposes them.
    virtual std::optional<std::vector<double>> generative_weights(const CandidatePack&) { return std::nullopt; }
    virtual std::optional<std::vector<double>> discriminative_weights(const CandidatePack&) { return std::nullopt; }
};

class SyntheticOracle final : public Oracle {
public:
    SyntheticOracle(std::shared_ptr<const GridScene> scene, SyntheticOracleConfig cfg);

    std::optional<int> sample_answer(const CandidatePack& pack, Rng& rng) override;
    std::vector<std::optional<bool>> sample_verdicts(const CandidatePack& pack, Rng& rng) override;
    std::optional<std::vector<double>> generative_weights(const CandidatePack& pack) override;
    std::optional<std::vector<double>> discriminative_weights(const CandidatePack& pack) override;

    const SyntheticOracleConfig& config() const { return cfg_; }

private:
    std::shared_ptr<const GridScene> scene_;
    SyntheticOracleConfig cfg_;
};

// Empirical counts from n draws of the given channel (abstentions dropped).
// Generative: counts per answer. Discriminative: "yes" counts per option.
std::vector<double> estimate_distribution(Oracle& oracle, const CandidatePack& pack, int n, OracleMode mode,
                                          Rng& rng);

struct RemoteOracleConfig {
    std::string base_url;
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4o-mini";
    double temperature = 1.0;
    int samples = 5;
    double timeout_s = 30.0;
    int max_in_flight = 4;
    int max_retries = 3;
    double backoff_s = 0.5;
    std::string api_key_env = "VLN_GAME_API_KEY";

    void validate() const;
};

// Caps concurrent requests across every oracle sharing it.
class RequestLimiter {
public:
    explicit RequestLimiter(int slots) : free_(slots) {}
    void acquire();
    void release();

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int free_;
};

std::string render_prompt(const CandidatePack& pack, OracleMode mode, std::optional<int> candidate = std::nullopt);
nlohmann::json remote_request(const CandidatePack& pack, OracleMode mode, const RemoteOracleConfig& cfg,
                              std::optional<int> candidate = std::nullopt);

// Strict parsers. Generative: "candidate: <id>" or "candidate: none" (= n);
// out-of-range ids are rejected. Discriminative: "yes" / "no".
std::optional<int> parse_generative(const std::string& text, int n);
std::optional<bool> parse_discriminative(const std::string& text);

class RemoteOracle final : public Oracle {
public:
    RemoteOracle(RemoteOracleConfig cfg, std::shared_ptr<RequestLimiter> limiter);

    std::optional<int> sample_answer(const CandidatePack& pack, Rng& rng) override;
    std::vector<std::optional<bool>> sample_verdicts(const CandidatePack& pack, Rng& rng) override;

    long abstentions() const { return abstentions_.load(); }

private:
    // Message text of the first choice. Throws OracleUnavailable after retries,
    // MalformedResponse on a body that is not a chat completion.
    std::string post(const nlohmann::json& body);
    std::optional<std::string> post_or_abstain(const nlohmann::json& body);

    RemoteOracleConfig cfg_;
    std::shared_ptr<RequestLimiter> limiter_;
    std::string token_;
    std::atomic<long> abstentions_{0};
};

// Versioned prompt templates compiled in from data/prompts.
std::string_view generative_template();
std::string_view discriminative_template();

}  // namespace vlngame
