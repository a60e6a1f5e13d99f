#include "vlngame/oracles.hpp"

#include "vlngame/errors.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <numbers>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace vlngame {

void validate_pack(const CandidatePack& pack) {
    if (pack.candidates.empty()) throw std::invalid_argument("candidate pack is empty");
    for (int i = 0; i < pack.size(); ++i) {
        if (pack.candidates[i].id != i) throw std::invalid_argument("candidate ids must be contiguous from 0");
    }
}

namespace {

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 == 0.0 ? 0.0 : ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return distance(p, {a.x + t * dx, a.y + t * dy});
}

// Quadrant of `p` seen from `ref`: 0 east, 1 north, 2 west, 3 south.
int bearing_quadrant(Vec2 ref, Vec2 p) {
    const double deg = std::atan2(p.y - ref.y, p.x - ref.x) * 180.0 / std::numbers::pi;
    if (deg > -45.0 && deg <= 45.0) return 0;
    if (deg > 45.0 && deg <= 135.0) return 1;
    if (deg > -135.0 && deg <= -45.0) return 3;
    return 2;
}

int relation_quadrant(const std::string& relation) {
    if (relation == "right_of") return 0;
    if (relation == "behind") return 1;
    if (relation == "left_of") return 2;
    if (relation == "in_front_of") return 3;
    return -1;
}

constexpr double kNearM = 2.0;
constexpr double kBetweenM = 1.0;

bool holds(const GridScene& scene, const SceneObject& object, const Relation& rel) {
    auto others = [&](const std::string& category) {
        std::vector<const SceneObject*> out;
        for (const auto& o : scene.objects) {
            if (o.id != object.id && o.category == category) out.push_back(&o);
        }
        return out;
    };

    if (rel.relation == "between") {
        if (rel.references.size() != 2) return false;
        for (const auto* a : others(rel.references[0])) {
            for (const auto* b : others(rel.references[1])) {
                if (a == b) continue;
                if (point_segment_distance(object.centroid, a->centroid, b->centroid) <= kBetweenM) return true;
            }
        }
        return false;
    }

    for (const auto& ref : rel.references) {
        const auto refs = others(ref);
        if (refs.empty()) return false;
        if (rel.relation == "near") {
            const bool any = std::any_of(refs.begin(), refs.end(), [&](const SceneObject* r) {
                return distance(object.centroid, r->centroid) <= kNearM;
            });
            if (!any) return false;
            continue;
        }
        // Directional relations are judged against the nearest reference.
        const SceneObject* nearest = refs.front();
        for (const auto* r : refs) {
            if (distance(object.centroid, r->centroid) < distance(object.centroid, nearest->centroid)) nearest = r;
        }
        if (bearing_quadrant(nearest->centroid, object.centroid) != relation_quadrant(rel.relation)) return false;
    }
    return true;
}

}  // namespace

double relation_truth_score(const GridScene& scene, const SceneObject& object, const Query& query) {
    if (object.category != query.main_goal.category) return 0.0;
    const auto& attrs = query.main_goal.attributes;
    const std::size_t total = attrs.size() + query.relations.size();
    if (total == 0) return 1.0;
    std::size_t ok = 0;
    for (const auto& a : attrs) {
        if (std::find(object.attributes.begin(), object.attributes.end(), a) != object.attributes.end()) ++ok;
    }
    for (const auto& rel : query.relations) {
        if (holds(scene, object, rel)) ++ok;
    }
    return static_cast<double>(ok) / static_cast<double>(total);
}

std::vector<double> truth_scores(const GridScene& scene, const CandidatePack& pack) {
    std::vector<double> out;
    bool any_match = false;
    for (const auto& c : pack.candidates) {
        double s = 0.0;
        if (c.source_object) {
            if (const auto* obj = scene.find_object(*c.source_object)) s = relation_truth_score(scene, *obj, pack.query);
        }
        any_match = any_match || s >= 1.0;
        out.push_back(s);
    }
    out.push_back(any_match ? 0.0 : 1.0);
    return out;
}

void SyntheticOracleConfig::validate() const {
    if (!(gen_noise >= 0.0 && disc_noise >= 0.0)) throw std::invalid_argument("oracle noise must be >= 0");
    if (!(sharpness > 0.0)) throw std::invalid_argument("oracle sharpness must be > 0");
    if (!(temperature >= 0.0)) throw std::invalid_argument("oracle temperature must be >= 0");
}

namespace {

struct BiasTargets {
    std::optional<std::size_t> gen;
    std::optional<std::size_t> disc;
};

// Each channel's bias lands on a wrong option; distinct options when possible.
BiasTargets bias_targets(std::span<const double> truth, std::uint64_t seed) {
    std::vector<std::size_t> wrong;
    for (std::size_t r = 0; r < truth.size(); ++r) {
        if (truth[r] < 1.0) wrong.push_back(r);
    }
    BiasTargets t;
    if (wrong.empty()) return t;
    Rng rng(mix_seed(seed, 3));
    const std::size_t gi = rng.below(wrong.size());
    t.gen = wrong[gi];
    if (wrong.size() == 1) {
        t.disc = wrong[0];
    } else {
        std::size_t di = rng.below(wrong.size() - 1);
        if (di >= gi) ++di;
        t.disc = wrong[di];
    }
    return t;
}

void check_truth(const CandidatePack& pack, std::span<const double> truth) {
    validate_pack(pack);
    if (truth.size() != pack.candidates.size() + 1) throw std::invalid_argument("truth must have N + 1 entries");
}

std::vector<double> generative_logits(const CandidatePack& pack, std::span<const double> truth,
                                      const SyntheticOracleConfig& cfg) {
    check_truth(pack, truth);
    Rng noise(mix_seed(cfg.seed, 1));
    const auto targets = bias_targets(truth, cfg.seed);
    std::vector<double> logits(truth.size());
    for (std::size_t r = 0; r < truth.size(); ++r) {
        logits[r] = cfg.sharpness * truth[r] + cfg.gen_noise * noise.normal();
        if (targets.gen == r) logits[r] += cfg.gen_bias;
    }
    return logits;
}

std::vector<double> discriminative_logits(const CandidatePack& pack, std::span<const double> truth,
                                          const SyntheticOracleConfig& cfg) {
    check_truth(pack, truth);
    Rng noise(mix_seed(cfg.seed, 2));
    const auto targets = bias_targets(truth, cfg.seed);
    std::vector<double> logits(truth.size());
    for (std::size_t r = 0; r < truth.size(); ++r) {
        logits[r] = cfg.sharpness * (truth[r] - 0.5) + cfg.disc_noise * noise.normal();
        if (targets.disc == r) logits[r] += cfg.disc_bias;
    }
    return logits;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

std::vector<double> synthetic_generative(const CandidatePack& pack, std::span<const double> truth,
                                         const SyntheticOracleConfig& cfg) {
    auto logits = generative_logits(pack, truth, cfg);
    const double m = *std::max_element(logits.begin(), logits.end());
    for (auto& v : logits) v = std::exp(v - m);
    return logits;
}

std::vector<double> synthetic_discriminative(const CandidatePack& pack, std::span<const double> truth,
                                             const SyntheticOracleConfig& cfg) {
    auto logits = discriminative_logits(pack, truth, cfg);
    for (auto& v : logits) v = sigmoid(v);
    return logits;
}

SyntheticOracle::SyntheticOracle(std::shared_ptr<const GridScene> scene, SyntheticOracleConfig cfg)
    : scene_(std::move(scene)), cfg_(cfg) {
    cfg_.validate();
}

std::optional<std::vector<double>> SyntheticOracle::generative_weights(const CandidatePack& pack) {
    return synthetic_generative(pack, truth_scores(*scene_, pack), cfg_);
}

std::optional<std::vector<double>> SyntheticOracle::discriminative_weights(const CandidatePack& pack) {
    return synthetic_discriminative(pack, truth_scores(*scene_, pack), cfg_);
}

std::optional<int> SyntheticOracle::sample_answer(const CandidatePack& pack, Rng& rng) {
    const auto logits = generative_logits(pack, truth_scores(*scene_, pack), cfg_);
    if (cfg_.temperature == 0.0) return static_cast<int>(argmax(logits));
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp((logits[i] - m) / cfg_.temperature);
        sum += p[i];
    }
    double u = rng.uniform() * sum;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (u < p[i]) return static_cast<int>(i);
        u -= p[i];
    }
    return static_cast<int>(p.size() - 1);
}

std::vector<std::optional<bool>> SyntheticOracle::sample_verdicts(const CandidatePack& pack, Rng& rng) {
    const auto logits = discriminative_logits(pack, truth_scores(*scene_, pack), cfg_);
    std::vector<std::optional<bool>> out(logits.size());
    bool all_no = true;
    for (std::size_t r = 0; r + 1 < logits.size(); ++r) {
        const bool yes = cfg_.temperature == 0.0 ? logits[r] > 0.0
                                                 : rng.uniform() < sigmoid(logits[r] / cfg_.temperature);
        out[r] = yes;
        all_no = all_no && !yes;
    }
    out.back() = all_no;
    return out;
}

std::vector<double> estimate_distribution(Oracle& oracle, const CandidatePack& pack, int n, OracleMode mode,
                                          Rng& rng) {
    validate_pack(pack);
    if (n < 1) throw std::invalid_argument("sample count must be >= 1");
    std::vector<double> counts(pack.candidates.size() + 1, 0.0);
    for (int k = 0; k < n; ++k) {
        if (mode == OracleMode::generative) {
            const auto a = oracle.sample_answer(pack, rng);
            if (a && *a >= 0 && *a < static_cast<int>(counts.size())) counts[*a] += 1.0;
        } else {
            const auto verdicts = oracle.sample_verdicts(pack, rng);
            for (std::size_t r = 0; r < counts.size() && r < verdicts.size(); ++r) {
                if (verdicts[r].value_or(false)) counts[r] += 1.0;
            }
        }
    }
    return counts;
}

void RemoteOracleConfig::validate() const {
    if (base_url.empty()) throw ConfigError("remote oracle needs a base URL");
    if (samples < 1) throw ConfigError("remote oracle sample count must be >= 1");
    if (!(temperature >= 0.0)) throw ConfigError("remote oracle temperature must be >= 0");
    if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
}

void RequestLimiter::acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [this] { return free_ > 0; });
    --free_;
}

void RequestLimiter::release() {
    {
        std::lock_guard lock(mu_);
        ++free_;
    }
    cv_.notify_one();
}

namespace {

std::string compass(double bearing_deg) {
    static const char* names[] = {"east", "north", "west", "south"};
    const double b = normalize_heading(bearing_deg + 45.0);
    return names[static_cast<int>(b / 90.0) % 4];
}

std::string describe(const CandidateView& c) {
    std::ostringstream out;
    out << "a " << (c.label.empty() ? "object" : c.label);
    if (!c.context.empty()) {
        out << ". Nearby: ";
        for (std::size_t i = 0; i < c.context.size(); ++i) {
            const auto& ctx = c.context[i];
            char dist[32];
            std::snprintf(dist, sizeof dist, "%.1f", ctx.distance_m);
            if (i) out << ", ";
            out << ctx.category << ' ' << dist << " m to the " << compass(ctx.bearing_deg);
        }
    }
    out << '.';
    return out.str();
}

std::string fill(std::string_view tmpl, const std::vector<std::pair<std::string, std::string>>& values) {
    std::string out(tmpl);
    for (const auto& [key, value] : values) {
        const std::string token = "{{" + key + "}}";
        for (auto pos = out.find(token); pos != std::string::npos; pos = out.find(token, pos + value.size())) {
            out.replace(pos, token.size(), value);
        }
    }
    return out;
}

}  // namespace

std::string render_prompt(const CandidatePack& pack, OracleMode mode, std::optional<int> candidate) {
    validate_pack(pack);
    if (mode == OracleMode::generative) {
        std::ostringstream blocks;
        for (const auto& c : pack.candidates) blocks << "Candidate " << c.id << ": " << describe(c) << '\n';
        return fill(generative_template(), {{"query", pack.query.raw_text},
                                            {"count", std::to_string(pack.size())},
                                            {"candidates", blocks.str()}});
    }
    if (!candidate || *candidate < 0 || *candidate >= pack.size()) {
        throw std::invalid_argument("discriminative prompt needs a valid candidate id");
    }
    return fill(discriminative_template(),
                {{"query", pack.query.raw_text}, {"candidate", "Object: " + describe(pack.candidates[*candidate])}});
}

nlohmann::json remote_request(const CandidatePack& pack, OracleMode mode, const RemoteOracleConfig& cfg,
                              std::optional<int> candidate) {
    return {{"model", cfg.model},
            {"temperature", cfg.temperature},
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", render_prompt(pack, mode, candidate)}}})}};
}

std::optional<int> parse_generative(const std::string& text, int n) {
    static const std::regex re(R"(^\s*candidate:\s*(\d+|none)\s*$)", std::regex::icase);
    std::smatch m;
    if (!std::regex_match(text, m, re)) return std::nullopt;
    std::string v = m[1].str();
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "none") return n;
    if (v.size() > 6) return std::nullopt;
    const int id = std::stoi(v);
    if (id >= n) return std::nullopt;
    return id;
}

std::optional<bool> parse_discriminative(const std::string& text) {
    static const std::regex re(R"(^\s*(yes|no)\s*$)", std::regex::icase);
    std::smatch m;
    if (!std::regex_match(text, m, re)) return std::nullopt;
    return std::tolower(static_cast<unsigned char>(m[1].str()[0])) == 'y';
}

RemoteOracle::RemoteOracle(RemoteOracleConfig cfg, std::shared_ptr<RequestLimiter> limiter)
    : cfg_(std::move(cfg)), limiter_(std::move(limiter)) {
    cfg_.validate();
    if (!limiter_) limiter_ = std::make_shared<RequestLimiter>(cfg_.max_in_flight);
    if (const char* tok = std::getenv(cfg_.api_key_env.c_str())) token_ = tok;
}

std::string RemoteOracle::post(const nlohmann::json& body) {
    struct Slot {
        RequestLimiter& l;
        explicit Slot(RequestLimiter& lim) : l(lim) { l.acquire(); }
        ~Slot() { l.release(); }
    } slot(*limiter_);

    httplib::Client client(cfg_.base_url);
    const auto timeout = std::chrono::duration<double>(cfg_.timeout_s);
    const auto sec = std::chrono::duration_cast<std::chrono::seconds>(timeout).count();
    const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout).count() % 1000000;
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::duration<double>(cfg_.backoff_s * std::pow(2.0, attempt - 1)));
        }
        auto res = client.Post(cfg_.path, headers, body.dump(), "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        try {
            const auto doc = nlohmann::json::parse(res->body);
            return doc.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw MalformedResponse(std::string("unexpected completion body: ") + e.what());
        }
    }
    throw OracleUnavailable("remote oracle at " + cfg_.base_url + " failed: " + last_error);
}

std::optional<std::string> RemoteOracle::post_or_abstain(const nlohmann::json& body) {
    try {
        return post(body);
    } catch (const MalformedResponse& e) {
        std::clog << "oracle: " << e.what() << '\n';
        ++abstentions_;
        return std::nullopt;
    }
}

std::optional<int> RemoteOracle::sample_answer(const CandidatePack& pack, Rng& /*rng*/) {
    const auto text = post_or_abstain(remote_request(pack, OracleMode::generative, cfg_));
    if (!text) return std::nullopt;
    auto id = parse_generative(*text, pack.size());
    if (!id) {
        std::clog << "oracle: unparseable answer treated as abstention\n";
        ++abstentions_;
    }
    return id;
}

std::vector<std::optional<bool>> RemoteOracle::sample_verdicts(const CandidatePack& pack, Rng& /*rng*/) {
    std::vector<std::optional<bool>> out(pack.candidates.size() + 1);
    bool all_no = true;
    bool any_answer = false;
    for (int i = 0; i < pack.size(); ++i) {
        const auto text = post_or_abstain(remote_request(pack, OracleMode::discriminative, cfg_, i));
        if (text) out[i] = parse_discriminative(*text);
        if (text && !out[i]) {
            std::clog << "oracle: unparseable verdict treated as abstention\n";
            ++abstentions_;
        }
        if (out[i]) {
            any_answer = true;
            all_no = all_no && !*out[i];
        }
    }
    if (any_answer) out.back() = all_no;
    return out;
}

}  // namespace vlngame
