#include "vlngame/semantics.hpp"

#include "vlngame/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

namespace vlngame {

namespace {

constexpr std::array<std::pair<std::string_view, std::string_view>, 24> kContextGroups{{
    {"chair", "office"},       {"office_chair", "office"}, {"desk", "office"},
    {"monitor", "office"},     {"screen", "office"},       {"table", "office"},
    {"bookshelf", "office"},   {"fridge", "kitchen"},      {"oven", "kitchen"},
    {"sink", "kitchen"},       {"microwave", "kitchen"},   {"dining_table", "kitchen"},
    {"bed", "bedroom"},        {"nightstand", "bedroom"},  {"wardrobe", "bedroom"},
    {"lamp", "bedroom"},       {"sofa", "living"},         {"couch", "living"},
    {"tv", "living"},          {"armchair", "living"},     {"coffee_table", "living"},
    {"potted_plant", "living"}, {"toilet", "bathroom"},    {"bathtub", "bathroom"},
}};

// Mixing weights for shared context vs. token-specific direction; same-group
// categories end up near cosine 0.36.
constexpr double kGroupWeight = 0.6;
constexpr double kSpecificWeight = 0.8;
constexpr double kAttributeWeight = 0.5;
constexpr double kInstanceWeight = 0.25;

Embedding gaussian_unit(std::uint64_t seed, int dim) {
    Rng rng(seed);
    Embedding v(static_cast<std::size_t>(dim));
    for (auto& x : v) x = rng.normal();
    normalize_in_place(v);
    return v;
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void normalize_in_place(Embedding& v) {
    const double n = norm(v);
    if (n > 0.0) {
        for (auto& x : v) x /= n;
    }
}

double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

std::string_view context_group(std::string_view category) {
    for (const auto& [token, group] : kContextGroups) {
        if (token == category) return group;
    }
    return {};
}

Embedding token_embedding(std::string_view token, int dim) {
    Embedding specific = gaussian_unit(hash_token(token), dim);
    const auto group = context_group(token);
    if (group.empty()) return specific;

    std::string key = "group:";
    key += group;
    const Embedding shared = gaussian_unit(hash_token(key), dim);
    Embedding v(static_cast<std::size_t>(dim));
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = kGroupWeight * shared[i] + kSpecificWeight * specific[i];
    normalize_in_place(v);
    return v;
}

Embedding compose_embedding(std::string_view category, std::span<const std::string> attributes, int dim) {
    Embedding v = token_embedding(category, dim);
    if (!attributes.empty()) {
        const double w = kAttributeWeight / static_cast<double>(attributes.size());
        for (const auto& attr : attributes) {
            const Embedding a = token_embedding(attr, dim);
            for (std::size_t i = 0; i < v.size(); ++i) v[i] += w * a[i];
        }
    }
    normalize_in_place(v);
    return v;
}

Embedding instance_embedding(std::string_view category, std::span<const std::string> attributes,
                             std::uint64_t seed, int dim) {
    Embedding v = compose_embedding(category, attributes, dim);
    const Embedding jitter = gaussian_unit(mix_seed(seed, 0x0b1ec7), dim);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += kInstanceWeight * jitter[i];
    normalize_in_place(v);
    return v;
}

std::string classify(std::span<const double> embedding, std::span<const std::string> vocabulary) {
    std::string best;
    double best_cos = -2.0;
    for (const auto& word : vocabulary) {
        const double c = cosine(embedding, token_embedding(word, static_cast<int>(embedding.size())));
        if (c > best_cos) {
            best_cos = c;
            best = word;
        }
    }
    return best;
}

}  // namespace vlngame
