#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vlngame {

using Embedding = std::vector<double>;

inline constexpr int kDefaultEmbeddingDim = 16;

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
void normalize_in_place(Embedding& v);

// Cosine similarity; 0 when either vector is zero.
double cosine(std::span<const double> a, std::span<const double> b);

// Maps a cosine in [-1, 1] onto [0, 1].
inline double unit_similarity(double cos) { return 0.5 * (cos + 1.0); }

// Deterministic text-side embedding for a single token. Tokens that belong to
// the same household context (office, kitchen, ...) share a common direction,
// so related categories are closer than unrelated ones.
Embedding token_embedding(std::string_view token, int dim = kDefaultEmbeddingDim);

// Embedding of "<attributes...> <category>", unit norm.
Embedding compose_embedding(std::string_view category, std::span<const std::string> attributes,
                            int dim = kDefaultEmbeddingDim);

// Ground-truth visual embedding of a physical object: the composed text
// embedding perturbed by a per-instance direction drawn from seed.
Embedding instance_embedding(std::string_view category, std::span<const std::string> attributes,
                             std::uint64_t seed, int dim = kDefaultEmbeddingDim);

// Zero-shot label: vocabulary entry whose token embedding has the highest cosine.
std::string classify(std::span<const double> embedding, std::span<const std::string> vocabulary);

// Context group of a category token, empty when unknown.
std::string_view context_group(std::string_view category);

}  // namespace vlngame
