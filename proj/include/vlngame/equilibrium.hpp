#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace vlngame {

// Equilibrium search between a Generator and a Discriminator over a candidate
// set. Support element i < N is candidate i; element N is "no match".

// Probability vector over candidates plus the trailing no-match option.
class PolicyDistribution {
public:
    PolicyDistribution() = default;
    // Throws std::invalid_argument unless probs is a valid simplex point of size >= 2.
    explicit PolicyDistribution(std::vector<double> probs);

    static PolicyDistribution uniform(std::size_t support);

    std::size_t size() const { return probs_.size(); }
    std::size_t no_match_index() const { return probs_.size() - 1; }
    double operator[](std::size_t i) const { return probs_[i]; }
    std::span<const double> probs() const { return probs_; }

    friend bool operator==(const PolicyDistribution&, const PolicyDistribution&) = default;

private:
    std::vector<double> probs_;
};

inline constexpr double kSimplexTolerance = 1e-9;

bool is_simplex(std::span<const double> probs, double tol = kSimplexTolerance);

double total_variation(std::span<const double> a, std::span<const double> b);

struct EquilibriumConfig {
    double eta_g = 0.1;
    double eta_d = 0.1;
    double lambda_g = 0.1;
    double lambda_d = 0.1;
    int iters = 5000;
    double bias = 0.01;
    bool early_exit = true;
    double early_exit_tol = 1e-9;
    int early_exit_patience = 10;
    bool record_trace = false;

    void validate() const;
};

struct PolicyPair {
    PolicyDistribution generator;
    PolicyDistribution discriminator;
};

// Each player: normalize raw weights, add bias to every option, renormalize.
// Throws DegenerateInput when all weights are zero and bias is 0.
PolicyPair init_policies(std::span<const double> gen_weights, std::span<const double> disc_weights, double bias);

struct GameState {
    PolicyPair initial;
    PolicyPair current;
    std::vector<double> sum_g;  // sum over tau of pi_G^(tau)
    std::vector<double> sum_d;
    std::vector<double> q_g;  // (1 / 2t) * sum_d
    std::vector<double> q_d;  // (1 / 2t) * sum_g
    int t = 1;
    bool folded = false;  // current pair already folded into the sums

    explicit GameState(PolicyPair init);
};

// Folds the current pair (tau = t) into the running sums and recomputes both Q vectors.
void q_update(GameState& state);

// pi^(t+1)(r) proportional to exp{(Q(r) + lambda log pi^(1)(r)) / (1/(eta t) + lambda)}.
PolicyDistribution policy_update(std::span<const double> q, const PolicyDistribution& initial, double eta,
                                 double lambda, int t);

// One full round: Q update, both policy updates, t -> t + 1.
void advance(GameState& state, const EquilibriumConfig& cfg);

struct TraceRow {
    int t = 0;
    double agreement = 0.0;
    double tv_g_from_initial = 0.0;
    double tv_d_from_initial = 0.0;
};

struct EquilibriumResult {
    PolicyPair final_pair;
    int iterations = 0;  // rounds actually run
    std::vector<TraceRow> trace;
};

EquilibriumResult run_equilibrium(const PolicyPair& initial, const EquilibriumConfig& cfg);

// Diagnostic CSV: t, agreement, tv_g, tv_d.
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);

// (1/2) * sum_r pi_G(r) pi_D(r).
double expected_agreement(const PolicyPair& pair);
double expected_agreement(std::span<const double> g, std::span<const double> d);

// lambda * KL(pi || pi^(1)).
double kl_penalty(std::span<const double> policy, std::span<const double> initial, double lambda);

// Regularized utility of one player: agreement minus its own KL penalty.
double regularized_utility(std::span<const double> own, std::span<const double> other,
                           std::span<const double> own_initial, double lambda);

// argmax_r pi_G(r) * pi_D(r), ties to the lower index; nullopt when the
// argmax is the no-match option.
std::optional<int> select_target(const PolicyPair& pair);

// Tracks each player's time-averaged external regret against the best fixed
// policy in hindsight under the KL-regularized utility.
class RegretTracker {
public:
    RegretTracker(const PolicyPair& initial, double lambda_g, double lambda_d);

    // Record the pair played at round t (call once per round, t = 1, 2, ...).
    void observe(const PolicyPair& played);

    int rounds() const { return rounds_; }
    double average_regret_generator() const;
    double average_regret_discriminator() const;

private:
    double best_fixed_value(std::span<const double> opponent_sum, std::span<const double> initial,
                            double lambda) const;

    std::vector<double> init_g_;
    std::vector<double> init_d_;
    double lambda_g_;
    double lambda_d_;
    std::vector<double> sum_g_;
    std::vector<double> sum_d_;
    double realized_g_ = 0.0;
    double realized_d_ = 0.0;
    int rounds_ = 0;
};

}  // namespace vlngame
