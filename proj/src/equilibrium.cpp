#include "vlngame/equilibrium.hpp"

#include "vlngame/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace vlngame {

namespace {

std::vector<double> normalized(std::span<const double> w) {
    double sum = 0.0;
    for (double v : w) sum += v;
    std::vector<double> out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] / sum;
    return out;
}

// Normalizes raw weights, then mixes in the bias and renormalizes.
PolicyDistribution initial_policy(std::span<const double> weights, double bias, const char* who) {
    if (weights.size() < 2) throw std::invalid_argument(std::string(who) + ": support must have >= 2 entries");
    double sum = 0.0;
    for (double v : weights) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument(std::string(who) + ": weights must be finite and non-negative");
        }
        sum += v;
    }
    if (!(bias >= 0.0)) throw std::invalid_argument("bias must be non-negative");
    if (sum == 0.0 && bias == 0.0) throw DegenerateInput(std::string(who) + ": all weights are zero and bias is 0");

    std::vector<double> p(weights.size(), 0.0);
    if (sum > 0.0) p = normalized(weights);
    for (auto& v : p) v += bias;
    return PolicyDistribution(normalized(p));
}

double log_sum_exp_weighted(std::span<const double> weights, std::span<const double> exponents) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] > 0.0) m = std::max(m, exponents[i]);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] > 0.0) s += weights[i] * std::exp(exponents[i] - m);
    }
    return m + std::log(s);
}

}  // namespace

PolicyDistribution::PolicyDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.size() < 2) throw std::invalid_argument("policy support must have >= 2 entries");
    if (!is_simplex(probs_)) throw std::invalid_argument("policy is not a probability vector");
}

PolicyDistribution PolicyDistribution::uniform(std::size_t support) {
    return PolicyDistribution(std::vector<double>(support, 1.0 / static_cast<double>(support)));
}

bool is_simplex(std::span<const double> probs, double tol) {
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) return false;
        sum += p;
    }
    return std::abs(sum - 1.0) <= tol;
}

double total_variation(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return 0.5 * s;
}

void EquilibriumConfig::validate() const {
    if (!(eta_g > 0.0 && eta_d > 0.0)) throw std::invalid_argument("learning rates must be positive");
    if (!(lambda_g > 0.0 && lambda_d > 0.0)) throw std::invalid_argument("KL weights must be positive");
    if (iters < 1) throw std::invalid_argument("iters must be >= 1");
    if (!(bias >= 0.0)) throw std::invalid_argument("bias must be non-negative");
}

PolicyPair init_policies(std::span<const double> gen_weights, std::span<const double> disc_weights, double bias) {
    if (gen_weights.size() != disc_weights.size()) {
        throw std::invalid_argument("generator and discriminator supports differ");
    }
    return {initial_policy(gen_weights, bias, "generator"), initial_policy(disc_weights, bias, "discriminator")};
}

GameState::GameState(PolicyPair init)
    : initial(init),
      current(std::move(init)),
      sum_g(initial.generator.size(), 0.0),
      sum_d(initial.generator.size(), 0.0),
      q_g(initial.generator.size(), 0.0),
      q_d(initial.generator.size(), 0.0) {
    if (initial.generator.size() != initial.discriminator.size()) {
        throw std::invalid_argument("generator and discriminator supports differ");
    }
}

void q_update(GameState& state) {
    if (!state.folded) {
        const auto g = state.current.generator.probs();
        const auto d = state.current.discriminator.probs();
        for (std::size_t i = 0; i < state.sum_g.size(); ++i) {
            state.sum_g[i] += g[i];
            state.sum_d[i] += d[i];
        }
        state.folded = true;
    }
    const double scale = 1.0 / (2.0 * state.t);
    for (std::size_t i = 0; i < state.q_g.size(); ++i) {
        state.q_g[i] = std::clamp(state.sum_d[i] * scale, 0.0, 0.5);
        state.q_d[i] = std::clamp(state.sum_g[i] * scale, 0.0, 0.5);
    }
}

PolicyDistribution policy_update(std::span<const double> q, const PolicyDistribution& initial, double eta,
                                 double lambda, int t) {
    const double denom = 1.0 / (eta * static_cast<double>(t)) + lambda;
    std::vector<double> logits(q.size());
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < q.size(); ++i) {
        logits[i] = (q[i] + lambda * std::log(initial[i])) / denom;
        m = std::max(m, logits[i]);
    }
    double sum = 0.0;
    for (auto& v : logits) {
        v = std::exp(v - m);
        sum += v;
    }
    for (auto& v : logits) v /= sum;
    return PolicyDistribution(std::move(logits));
}

void advance(GameState& state, const EquilibriumConfig& cfg) {
    q_update(state);
    PolicyDistribution g = policy_update(state.q_g, state.initial.generator, cfg.eta_g, cfg.lambda_g, state.t);
    PolicyDistribution d = policy_update(state.q_d, state.initial.discriminator, cfg.eta_d, cfg.lambda_d, state.t);
    state.current = {std::move(g), std::move(d)};
    ++state.t;
    state.folded = false;
}

EquilibriumResult run_equilibrium(const PolicyPair& initial, const EquilibriumConfig& cfg) {
    cfg.validate();
    GameState state(initial);
    EquilibriumResult result;
    int quiet = 0;
    for (int i = 0; i < cfg.iters; ++i) {
        const PolicyPair before = state.current;
        advance(state, cfg);
        ++result.iterations;
        if (cfg.record_trace) {
            result.trace.push_back({state.t, expected_agreement(state.current),
                                    total_variation(state.current.generator.probs(), initial.generator.probs()),
                                    total_variation(state.current.discriminator.probs(),
                                                    initial.discriminator.probs())});
        }
        if (cfg.early_exit) {
            const double moved =
                std::max(total_variation(before.generator.probs(), state.current.generator.probs()),
                         total_variation(before.discriminator.probs(), state.current.discriminator.probs()));
            quiet = moved < cfg.early_exit_tol ? quiet + 1 : 0;
            if (quiet >= cfg.early_exit_patience) break;
        }
    }
    result.final_pair = state.current;
    return result;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
    out << "t,agreement,tv_g,tv_d\n";
    const auto old_precision = out.precision(17);
    for (const auto& row : trace) {
        out << row.t << ',' << row.agreement << ',' << row.tv_g_from_initial << ',' << row.tv_d_from_initial << '\n';
    }
    out.precision(old_precision);
}

double expected_agreement(std::span<const double> g, std::span<const double> d) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * d[i];
    return 0.5 * s;
}

double expected_agreement(const PolicyPair& pair) {
    return expected_agreement(pair.generator.probs(), pair.discriminator.probs());
}

double kl_penalty(std::span<const double> policy, std::span<const double> initial, double lambda) {
    if (lambda == 0.0) return 0.0;
    double kl = 0.0;
    for (std::size_t i = 0; i < policy.size(); ++i) {
        if (policy[i] > 0.0) kl += policy[i] * std::log(policy[i] / initial[i]);
    }
    return lambda * std::max(kl, 0.0);
}

double regularized_utility(std::span<const double> own, std::span<const double> other,
                           std::span<const double> own_initial, double lambda) {
    return expected_agreement(own, other) - kl_penalty(own, own_initial, lambda);
}

std::optional<int> select_target(const PolicyPair& pair) {
    std::size_t best = 0;
    double best_v = -1.0;
    for (std::size_t i = 0; i < pair.generator.size(); ++i) {
        const double v = pair.generator[i] * pair.discriminator[i];
        if (v > best_v) {
            best_v = v;
            best = i;
        }
    }
    if (best == pair.generator.no_match_index()) return std::nullopt;
    return static_cast<int>(best);
}

RegretTracker::RegretTracker(const PolicyPair& initial, double lambda_g, double lambda_d)
    : init_g_(initial.generator.probs().begin(), initial.generator.probs().end()),
      init_d_(initial.discriminator.probs().begin(), initial.discriminator.probs().end()),
      lambda_g_(lambda_g),
      lambda_d_(lambda_d),
      sum_g_(init_g_.size(), 0.0),
      sum_d_(init_d_.size(), 0.0) {}

void RegretTracker::observe(const PolicyPair& played) {
    const auto g = played.generator.probs();
    const auto d = played.discriminator.probs();
    realized_g_ += regularized_utility(g, d, init_g_, lambda_g_);
    realized_d_ += regularized_utility(d, g, init_d_, lambda_d_);
    for (std::size_t i = 0; i < sum_g_.size(); ++i) {
        sum_g_[i] += g[i];
        sum_d_[i] += d[i];
    }
    ++rounds_;
}

// max over pi of sum_tau [ (1/2) pi . opp_tau - lambda KL(pi || init) ]
//   = T lambda log sum_r init(r) exp(S(r) / (2 T lambda)).
double RegretTracker::best_fixed_value(std::span<const double> opponent_sum, std::span<const double> initial,
                                       double lambda) const {
    const double t = static_cast<double>(rounds_);
    std::vector<double> exponents(opponent_sum.size());
    for (std::size_t i = 0; i < exponents.size(); ++i) exponents[i] = opponent_sum[i] / (2.0 * t * lambda);
    return t * lambda * log_sum_exp_weighted(initial, exponents);
}

double RegretTracker::average_regret_generator() const {
    if (rounds_ == 0) return 0.0;
    return (best_fixed_value(sum_d_, init_g_, lambda_g_) - realized_g_) / rounds_;
}

double RegretTracker::average_regret_discriminator() const {
    if (rounds_ == 0) return 0.0;
    return (best_fixed_value(sum_g_, init_d_, lambda_d_) - realized_d_) / rounds_;
}

}  // namespace vlngame
