#pragma once

// Independent long-double implementations of the regularized consensus game:
// the averaged no-regret iteration, a grid-search equilibrium for two-option
// games, and external regret against the best fixed policy.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

using Vec = std::vector<long double>;

inline Vec normalized(Vec v) {
    long double s = 0;
    for (auto x : v) s += x;
    for (auto& x : v) x /= s;
    return v;
}

inline Vec to_ld(const std::vector<double>& v) { return Vec(v.begin(), v.end()); }

inline double tv(const Vec& a, const Vec& b) {
    long double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
    return static_cast<double>(s / 2);
}

// pi(r) proportional to exp{(q(r) + lambda log anchor(r)) / (1/(eta t) + lambda)}.
inline Vec anchored_step(const Vec& q, const Vec& anchor, long double eta, long double lambda, long double t) {
    const long double denom = 1.0L / (eta * t) + lambda;
    Vec e(q.size());
    for (std::size_t r = 0; r < q.size(); ++r) e[r] = (q[r] + lambda * std::log(anchor[r])) / denom;
    const long double m = *std::max_element(e.begin(), e.end());
    for (auto& x : e) x = std::exp(x - m);
    return normalized(e);
}

struct Pair {
    Vec g;
    Vec d;
};

// Runs `iters` rounds. Each player's payoff vector at round t is half the
// average of the opponent's policies over rounds 1..t.
inline Pair iterate_game(const Vec& g1, const Vec& d1, long double eta, long double lambda, int iters) {
    Vec g = g1, d = d1;
    Vec sum_g(g.size(), 0), sum_d(d.size(), 0);
    for (int t = 1; t <= iters; ++t) {
        for (std::size_t r = 0; r < g.size(); ++r) {
            sum_g[r] += g[r];
            sum_d[r] += d[r];
        }
        Vec qg(g.size()), qd(d.size());
        for (std::size_t r = 0; r < g.size(); ++r) {
            qg[r] = sum_d[r] / (2.0L * t);
            qd[r] = sum_g[r] / (2.0L * t);
        }
        g = anchored_step(qg, g1, eta, lambda, t);
        d = anchored_step(qd, d1, eta, lambda, t);
    }
    return {g, d};
}

inline long double kl(const Vec& p, const Vec& q) {
    long double s = 0;
    for (std::size_t r = 0; r < p.size(); ++r) {
        if (p[r] > 0) s += p[r] * std::log(p[r] / q[r]);
    }
    return s;
}

inline long double utility(const Vec& own, const Vec& other, const Vec& anchor, long double lambda) {
    long double s = 0;
    for (std::size_t r = 0; r < own.size(); ++r) s += own[r] * other[r];
    return s / 2 - lambda * kl(own, anchor);
}

// Two-option games: scans both players' first-option probability on a grid of
// the given step and returns every profile whose sum of unilateral gains (each
// measured over the same grid) is a local minimum over the 8 neighbouring
// profiles. The weakly regularized coordination game can have several.
inline std::vector<Pair> grid_equilibria(const Vec& g1, const Vec& d1, long double lambda, double step) {
    const int n = static_cast<int>(std::lround(1.0 / step));
    const int m = n + 1;
    std::vector<Vec> points(m);
    for (int i = 0; i <= n; ++i) {
        const long double p = static_cast<long double>(i) / n;
        points[i] = {p, 1 - p};
    }
    // ug[i * m + j]: generator at i against discriminator at j; ud likewise with roles swapped.
    std::vector<long double> ug(m * m), ud(m * m), best_g(m, -1e30L), best_d(m, -1e30L);
    for (int j = 0; j < m; ++j) {
        for (int i = 0; i < m; ++i) {
            ug[i * m + j] = utility(points[i], points[j], g1, lambda);
            ud[i * m + j] = utility(points[i], points[j], d1, lambda);
            best_g[j] = std::max(best_g[j], ug[i * m + j]);
            best_d[j] = std::max(best_d[j], ud[i * m + j]);
        }
    }
    std::vector<long double> gap(m * m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) gap[i * m + j] = (best_g[j] - ug[i * m + j]) + (best_d[i] - ud[j * m + i]);
    }
    std::vector<Pair> out;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            bool minimum = true;
            for (int di = -1; di <= 1 && minimum; ++di) {
                for (int dj = -1; dj <= 1; ++dj) {
                    const int a = i + di, b = j + dj;
                    if ((di == 0 && dj == 0) || a < 0 || b < 0 || a >= m || b >= m) continue;
                    // Strict against earlier neighbours so plateaus report once.
                    const bool earlier = di < 0 || (di == 0 && dj < 0);
                    if (earlier ? gap[a * m + b] <= gap[i * m + j] : gap[a * m + b] < gap[i * m + j]) {
                        minimum = false;
                        break;
                    }
                }
            }
            if (minimum) out.push_back({points[i], points[j]});
        }
    }
    return out;
}

// Time-averaged external regret of one player over a recorded sequence of
// (own, opponent) policies, against the best fixed policy in hindsight for the
// summed regularized utility. The best fixed policy has the closed form
// anchor * exp(S / (2 T lambda)) where S is the opponent sum.
inline double average_regret(const std::vector<Vec>& own, const std::vector<Vec>& other, const Vec& anchor,
                             long double lambda) {
    const std::size_t T = own.size();
    Vec s(anchor.size(), 0);
    long double realized = 0;
    for (std::size_t t = 0; t < T; ++t) {
        realized += utility(own[t], other[t], anchor, lambda);
        for (std::size_t r = 0; r < s.size(); ++r) s[r] += other[t][r];
    }
    Vec best(anchor.size());
    for (std::size_t r = 0; r < s.size(); ++r) best[r] = anchor[r] * std::exp(s[r] / (2.0L * T * lambda));
    best = normalized(best);
    long double fixed_total = 0;
    for (std::size_t r = 0; r < s.size(); ++r) fixed_total += best[r] * s[r];
    fixed_total = fixed_total / 2 - T * lambda * kl(best, anchor);
    return static_cast<double>((fixed_total - realized) / T);
}

}  // namespace oracle
