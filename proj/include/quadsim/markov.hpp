#pragma once

// Finite Markov chain over crisp states: transition counting, maximum
// likelihood estimation and n-step distribution propagation.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "quadsim/errors.hpp"

namespace quadsim {

inline constexpr double kStochasticTol = 1e-12;

struct TransitionCounts {
    std::vector<std::vector<std::uint64_t>> counts;  // square, counts[i][j] = #(i -> j)

    std::size_t n() const { return counts.size(); }

    std::vector<std::uint64_t> row_totals() const {
        std::vector<std::uint64_t> totals(counts.size(), 0);
        for (std::size_t i = 0; i < counts.size(); ++i) {
            for (std::uint64_t c : counts[i]) totals[i] += c;
        }
        return totals;
    }

    void validate() const {
        for (const auto& row : counts) {
            if (row.size() != counts.size()) throw ConfigError("transition counts must be square");
        }
    }

    static TransitionCounts zeros(std::size_t n) {
        TransitionCounts c;
        c.counts.assign(n, std::vector<std::uint64_t>(n, 0));
        return c;
    }
};

struct TransitionMatrix {
    std::vector<std::vector<double>> probs;  // row-stochastic

    std::size_t n() const { return probs.size(); }

    void validate(double tol = kStochasticTol) const {
        if (probs.empty()) throw ConfigError("transition matrix: empty");
        for (const auto& row : probs) {
            if (row.size() != probs.size()) throw ConfigError("transition matrix must be square");
            double sum = 0.0;
            for (double p : row) {
                if (!(p >= 0.0) || !(p <= 1.0)) {
                    throw ConfigError("transition matrix entry outside [0,1]");
                }
                sum += p;
            }
            if (std::abs(sum - 1.0) > tol) {
                throw ConfigError("transition matrix row sum deviates from 1 by " +
                                  std::to_string(sum - 1.0));
            }
        }
    }

    static TransitionMatrix identity(std::size_t n) {
        TransitionMatrix m;
        m.probs.assign(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i) m.probs[i][i] = 1.0;
        return m;
    }

    nlohmann::json to_json() const { return nlohmann::json(probs); }

    static TransitionMatrix from_json(const nlohmann::json& doc) {
        TransitionMatrix m;
        m.probs = doc.get<std::vector<std::vector<double>>>();
        m.validate();
        return m;
    }
};

struct StateDistribution {
    std::vector<double> probs;

    std::size_t n() const { return probs.size(); }

    void validate(double tol = kStochasticTol) const {
        if (probs.empty()) throw ConfigError("state distribution: empty");
        double sum = 0.0;
        for (double p : probs) {
            if (!(p >= 0.0) || !(p <= 1.0)) throw ConfigError("distribution entry outside [0,1]");
            sum += p;
        }
        if (std::abs(sum - 1.0) > tol) {
            throw ConfigError("distribution sum deviates from 1 by " + std::to_string(sum - 1.0));
        }
    }

    static StateDistribution uniform(std::size_t n) {
        StateDistribution d;
        d.probs.assign(n, 1.0 / static_cast<double>(n));
        return d;
    }

    static StateDistribution point(std::size_t n, std::size_t i) {
        StateDistribution d;
        d.probs.assign(n, 0.0);
        d.probs.at(i) = 1.0;
        return d;
    }
};

inline TransitionCounts count_transitions(std::span<const int> sequence, std::size_t n) {
    if (sequence.size() < 2) throw ConfigError("count_transitions: sequence shorter than 2");
    TransitionCounts out = TransitionCounts::zeros(n);
    for (std::size_t t = 0; t + 1 < sequence.size(); ++t) {
        const int i = sequence[t];
        const int j = sequence[t + 1];
        if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= n || static_cast<std::size_t>(j) >= n) {
            throw ConfigError("count_transitions: state index out of range at position " +
                              std::to_string(t));
        }
        ++out.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return out;
}

enum class ZeroRowPolicy { self_loop, uniform };

// Row-normalizes arbitrary nonnegative weights; rows that sum to zero follow
// the policy. Shared by the integer MLE path and fuzzy soft counting.
inline TransitionMatrix estimate_from_weights(const std::vector<std::vector<double>>& weights,
                                              ZeroRowPolicy policy = ZeroRowPolicy::self_loop) {
    const std::size_t n = weights.size();
    if (n == 0) throw ConfigError("estimate: empty weight matrix");
    TransitionMatrix m;
    m.probs.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        if (weights[i].size() != n) throw ConfigError("estimate: weight matrix must be square");
        double total = 0.0;
        for (double w : weights[i]) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("estimate: negative or non-finite weight");
            total += w;
        }
        if (total > 0.0) {
            for (std::size_t j = 0; j < n; ++j) m.probs[i][j] = weights[i][j] / total;
        } else if (policy == ZeroRowPolicy::self_loop) {
            m.probs[i][i] = 1.0;
        } else {
            for (std::size_t j = 0; j < n; ++j) m.probs[i][j] = 1.0 / static_cast<double>(n);
        }
    }
    m.validate();
    return m;
}

inline TransitionMatrix estimate(const TransitionCounts& counts,
                                 ZeroRowPolicy policy = ZeroRowPolicy::self_loop) {
    counts.validate();
    std::vector<std::vector<double>> weights(counts.n(), std::vector<double>(counts.n(), 0.0));
    for (std::size_t i = 0; i < counts.n(); ++i) {
        for (std::size_t j = 0; j < counts.n(); ++j) {
            weights[i][j] = static_cast<double>(counts.counts[i][j]);
        }
    }
    return estimate_from_weights(weights, policy);
}

namespace detail {

// v^T Pi, renormalized to counter round-off drift over long propagation.
inline std::vector<double> row_times_matrix(const std::vector<double>& v,
                                            const TransitionMatrix& pi) {
    const std::size_t n = pi.n();
    if (v.size() != n) throw ConfigError("dimension mismatch: vector vs transition matrix");
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double vi = v[i];
        if (vi == 0.0) continue;
        const auto& row = pi.probs[i];
        for (std::size_t j = 0; j < n; ++j) out[j] += vi * row[j];
    }
    double sum = 0.0;
    for (double x : out) sum += x;
    if (sum > 0.0) {
        for (double& x : out) x /= sum;
    }
    return out;
}

}  // namespace detail

inline StateDistribution propagate(const StateDistribution& p, const TransitionMatrix& pi,
                                   std::size_t n_steps) {
    p.validate();
    if (p.n() != pi.n()) throw ConfigError("propagate: dimension mismatch");
    StateDistribution out = p;
    for (std::size_t s = 0; s < n_steps; ++s) {
        out.probs = detail::row_times_matrix(out.probs, pi);
    }
    out.validate();
    return out;
}

// Fixed point of pi^T by repeated multiplication from the uniform start.
// Serves as the independent convergence oracle for propagate.
inline StateDistribution stationary(const TransitionMatrix& pi, double tol = 1e-10,
                                    std::size_t max_iter = 100000) {
    pi.validate();
    std::vector<double> v = StateDistribution::uniform(pi.n()).probs;
    for (std::size_t it = 0; it < max_iter; ++it) {
        std::vector<double> next = detail::row_times_matrix(v, pi);
        double delta = 0.0;
        for (std::size_t j = 0; j < v.size(); ++j) delta = std::max(delta, std::abs(next[j] - v[j]));
        if (delta <= tol) {
            // ||v Pi - v||_inf <= tol certifies v itself.
            StateDistribution d{std::move(v)};
            d.validate();
            return d;
        }
        v = std::move(next);
    }
    throw NumericalError("stationary: no convergence within max_iter (periodic or reducible chain?)");
}

}  // namespace quadsim
