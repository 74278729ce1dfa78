#pragma once

// Fuzzy encoding: membership families over a bounded interval, fuzzification,
// normalization, one-step propagation through a transition matrix, and
// expected-value prediction (weighted-centroid decode).

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "quadsim/errors.hpp"
#include "quadsim/markov.hpp"
#include "quadsim/trace.hpp"

namespace quadsim {

enum class MembershipKind { indicator_partition, triangular, trapezoidal, gaussian_truncated };

inline std::string to_string(MembershipKind k) {
    switch (k) {
        case MembershipKind::indicator_partition: return "indicator_partition";
        case MembershipKind::triangular: return "triangular";
        case MembershipKind::trapezoidal: return "trapezoidal";
        case MembershipKind::gaussian_truncated: return "gaussian_truncated";
    }
    return "?";
}

inline MembershipKind membership_kind_from_string(const std::string& s) {
    if (s == "indicator_partition") return MembershipKind::indicator_partition;
    if (s == "triangular") return MembershipKind::triangular;
    if (s == "trapezoidal") return MembershipKind::trapezoidal;
    if (s == "gaussian_truncated") return MembershipKind::gaussian_truncated;
    throw ConfigError("unknown membership kind: '" + s + "'");
}

struct MembershipParams {
    double ramp_fraction = 0.25;  // trapezoidal: ramp half-width as fraction of cell width, (0, 0.5]
    double sigma_scale = 0.5;     // gaussian: sigma as fraction of the peak spacing, > 0
};

namespace detail {

// (volume, first moment) of a piecewise-linear nonnegative function.
inline std::pair<double, double> pl_moments(const std::vector<std::array<double, 2>>& pts) {
    double vol = 0.0;
    double mom = 0.0;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        const double xa = pts[k][0], ya = pts[k][1];
        const double xb = pts[k + 1][0], yb = pts[k + 1][1];
        const double len = xb - xa;
        if (len <= 0.0) continue;
        vol += 0.5 * (ya + yb) * len;
        const double slope = (yb - ya) / len;
        const double i1 = 0.5 * (xb * xb - xa * xa);
        const double i2 = (xb * xb * xb - xa * xa * xa) / 3.0;
        mom += ya * i1 + slope * (i2 - xa * i1);
    }
    return {vol, mom};
}

}  // namespace detail

// N membership functions covering [bounds[0], bounds[1]], with precomputed
// volumes V_i and normalized centroids. Functions are zero outside bounds.
struct MembershipFamily {
    MembershipKind kind = MembershipKind::triangular;
    std::size_t n = 0;
    std::array<double, 2> bounds{0.0, 1.0};
    MembershipParams params;
    std::vector<double> volumes;
    std::vector<double> centroids;

    double width() const { return bounds[1] - bounds[0]; }

    double eval(std::size_t i, double x) const {
        if (x < bounds[0] || x > bounds[1]) return 0.0;
        switch (kind) {
            case MembershipKind::indicator_partition: {
                const double w = width() / static_cast<double>(n);
                const double lo = bounds[0] + w * static_cast<double>(i);
                if (i + 1 == n) return (x >= lo) ? 1.0 : 0.0;
                return (x >= lo && x < lo + w) ? 1.0 : 0.0;
            }
            case MembershipKind::triangular: {
                const double h = width() / static_cast<double>(n - 1);
                const double peak = bounds[0] + h * static_cast<double>(i);
                return std::max(0.0, 1.0 - std::abs(x - peak) / h);
            }
            case MembershipKind::trapezoidal: {
                const double w = width() / static_cast<double>(n);
                const double r = params.ramp_fraction * w;
                const double lo = bounds[0] + w * static_cast<double>(i);
                const double hi = lo + w;
                double v = 1.0;
                if (i > 0 && x < lo + r) v = std::min(v, (x - (lo - r)) / (2.0 * r));
                if (i + 1 < n && x > hi - r) v = std::min(v, ((hi + r) - x) / (2.0 * r));
                return std::clamp(v, 0.0, 1.0);
            }
            case MembershipKind::gaussian_truncated: {
                const double h = width() / static_cast<double>(n - 1);
                const double mu = bounds[0] + h * static_cast<double>(i);
                const double sigma = params.sigma_scale * h;
                const double z = (x - mu) / sigma;
                return std::exp(-0.5 * z * z);
            }
        }
        return 0.0;
    }

    std::vector<double> eval_all(double x) const {
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = eval(i, x);
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["kind"] = to_string(kind);
        j["n"] = n;
        j["bounds"] = bounds;
        j["params"] = {{"ramp_fraction", params.ramp_fraction}, {"sigma_scale", params.sigma_scale}};
        return j;
    }

    static MembershipFamily from_json(const nlohmann::json& j);
};

namespace detail {

inline void family_moments(MembershipFamily& fam) {
    const double a = fam.bounds[0];
    const double b = fam.bounds[1];
    fam.volumes.resize(fam.n);
    fam.centroids.resize(fam.n);
    for (std::size_t i = 0; i < fam.n; ++i) {
        double vol = 0.0, mom = 0.0;
        switch (fam.kind) {
            case MembershipKind::indicator_partition: {
                const double w = (b - a) / static_cast<double>(fam.n);
                const double lo = a + w * static_cast<double>(i);
                vol = w;
                mom = 0.5 * ((lo + w) * (lo + w) - lo * lo);
                break;
            }
            case MembershipKind::triangular: {
                const double h = (b - a) / static_cast<double>(fam.n - 1);
                const double peak = a + h * static_cast<double>(i);
                std::vector<std::array<double, 2>> pts;
                if (i > 0) pts.push_back({peak - h, 0.0});
                pts.push_back({peak, 1.0});
                if (i + 1 < fam.n) pts.push_back({peak + h, 0.0});
                std::tie(vol, mom) = pl_moments(pts);
                break;
            }
            case MembershipKind::trapezoidal: {
                const double w = (b - a) / static_cast<double>(fam.n);
                const double r = fam.params.ramp_fraction * w;
                const double lo = a + w * static_cast<double>(i);
                const double hi = lo + w;
                std::vector<std::array<double, 2>> pts;
                if (i > 0) {
                    pts.push_back({lo - r, 0.0});
                    pts.push_back({lo + r, 1.0});
                } else {
                    pts.push_back({a, 1.0});
                }
                if (i + 1 < fam.n) {
                    pts.push_back({hi - r, 1.0});
                    pts.push_back({hi + r, 0.0});
                } else {
                    pts.push_back({b, 1.0});
                }
                std::tie(vol, mom) = pl_moments(pts);
                break;
            }
            case MembershipKind::gaussian_truncated: {
                const double h = (b - a) / static_cast<double>(fam.n - 1);
                const double mu = a + h * static_cast<double>(i);
                const double sigma = fam.params.sigma_scale * h;
                const double inv = 1.0 / (sigma * std::numbers::sqrt2);
                vol = sigma * std::sqrt(std::numbers::pi / 2.0) *
                      (std::erf((b - mu) * inv) - std::erf((a - mu) * inv));
                mom = mu * vol + sigma * sigma * (fam.eval(i, a) - fam.eval(i, b));
                break;
            }
        }
        fam.volumes[i] = vol;
        fam.centroids[i] = mom / vol;
    }
}

}  // namespace detail

inline MembershipFamily make_family(MembershipKind kind, std::size_t n,
                                    std::array<double, 2> bounds, MembershipParams params = {}) {
    if (n < 2) throw ConfigError("membership family: n must be >= 2");
    if (!(bounds[0] < bounds[1]) || !std::isfinite(bounds[0]) || !std::isfinite(bounds[1])) {
        throw ConfigError("membership family: degenerate bounds");
    }
    if (kind == MembershipKind::trapezoidal &&
        !(params.ramp_fraction > 0.0 && params.ramp_fraction <= 0.5)) {
        throw ConfigError("membership family: ramp_fraction must be in (0, 0.5]");
    }
    if (kind == MembershipKind::gaussian_truncated && !(params.sigma_scale > 0.0)) {
        throw ConfigError("membership family: sigma_scale must be > 0");
    }
    MembershipFamily fam;
    fam.kind = kind;
    fam.n = n;
    fam.bounds = bounds;
    fam.params = params;
    detail::family_moments(fam);

    for (std::size_t i = 0; i < n; ++i) {
        if (!(fam.volumes[i] > 0.0)) throw ConfigError("membership family: zero volume function");
        if (fam.centroids[i] < bounds[0] || fam.centroids[i] > bounds[1]) {
            throw ConfigError("membership family: centroid outside bounds");
        }
    }
    // Existence condition: every point of a covering grid has positive membership somewhere.
    constexpr std::size_t grid = 2048;
    for (std::size_t g = 0; g <= grid; ++g) {
        const double x = bounds[0] + fam.width() * static_cast<double>(g) / static_cast<double>(grid);
        double best = 0.0;
        for (std::size_t i = 0; i < n; ++i) best = std::max(best, fam.eval(i, x));
        if (!(best > 0.0)) {
            throw ConfigError("membership family: coverage gap at x = " + format_double(x));
        }
    }
    return fam;
}

inline MembershipFamily MembershipFamily::from_json(const nlohmann::json& j) {
    MembershipParams params;
    if (j.contains("params")) {
        const auto& p = j.at("params");
        if (p.contains("ramp_fraction")) params.ramp_fraction = p.at("ramp_fraction").get<double>();
        if (p.contains("sigma_scale")) params.sigma_scale = p.at("sigma_scale").get<double>();
    }
    return make_family(membership_kind_from_string(j.at("kind").get<std::string>()),
                       j.at("n").get<std::size_t>(), j.at("bounds").get<std::array<double, 2>>(),
                       params);
}

// Trapezoid-rule fallback for families without closed-form moments; also the
// cross-check oracle for the closed forms above.
inline std::pair<double, double> numeric_moments(const MembershipFamily& fam, std::size_t i,
                                                 std::size_t panels = 10000) {
    const double a = fam.bounds[0];
    const double h = fam.width() / static_cast<double>(panels);
    double vol = 0.0, mom = 0.0;
    for (std::size_t k = 0; k <= panels; ++k) {
        const double x = a + h * static_cast<double>(k);
        const double weight = (k == 0 || k == panels) ? 0.5 : 1.0;
        const double theta = fam.eval(i, x);
        vol += weight * theta;
        mom += weight * x * theta;
    }
    vol *= h;
    mom *= h;
    return {vol, mom / vol};
}

struct PossibilityVector {
    std::vector<double> k;
};

struct FuzzyProbabilityVector {
    std::vector<double> k1;

    void validate(double tol = kStochasticTol) const {
        double sum = 0.0;
        for (double v : k1) {
            if (!(v >= 0.0) || !(v <= 1.0)) throw ConfigError("fuzzy probability entry outside [0,1]");
            sum += v;
        }
        if (std::abs(sum - 1.0) > tol) throw ConfigError("fuzzy probability vector sum != 1");
    }
};

// Raw membership degrees of x. Out-of-bounds inputs are clamped so live
// signals that drift past the training range keep producing predictions.
inline PossibilityVector fuzzify(double x, const MembershipFamily& fam) {
    const double clamped = std::clamp(x, fam.bounds[0], fam.bounds[1]);
    return PossibilityVector{fam.eval_all(clamped)};
}

inline FuzzyProbabilityVector normalize(const PossibilityVector& k) {
    double sum = 0.0;
    for (double v : k.k) sum += v;
    if (!(sum > 0.0)) throw CoverageError("coverage violation: possibility vector is all zero");
    FuzzyProbabilityVector out;
    out.k1.resize(k.k.size());
    for (std::size_t i = 0; i < k.k.size(); ++i) out.k1[i] = k.k[i] / sum;
    return out;
}

inline FuzzyProbabilityVector fem_step(const FuzzyProbabilityVector& k1,
                                       const TransitionMatrix& pi) {
    if (k1.k1.size() != pi.n()) throw ConfigError("fem_step: dimension mismatch");
    FuzzyProbabilityVector out{detail::row_times_matrix(k1.k1, pi)};
    out.validate();
    return out;
}

// Expected value of the propagated fuzzy state: weighted-centroid decode.
inline double fem_decode(const FuzzyProbabilityVector& w, const MembershipFamily& fam) {
    if (w.k1.size() != fam.n) throw ConfigError("fem_decode: dimension mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < fam.n; ++j) {
        const double wv = w.k1[j] * fam.volumes[j];
        num += wv * fam.centroids[j];
        den += wv;
    }
    return num / den;
}

inline double fem_predict(double x, const MembershipFamily& fam, const TransitionMatrix& pi,
                          std::size_t n_steps = 1) {
    if (n_steps < 1) throw ConfigError("fem_predict: n_steps must be >= 1");
    if (fam.n != pi.n()) throw ConfigError("fem_predict: family and matrix size differ");
    FuzzyProbabilityVector w = normalize(fuzzify(x, fam));
    for (std::size_t s = 0; s < n_steps; ++s) w = fem_step(w, pi);
    return fem_decode(w, fam);
}

enum class AssignmentRule { argmax, soft };

// Fits a transition matrix to a continuous trace through the family's fuzzy
// states. argmax assigns each sample to its strongest membership (ties to the
// lower index); soft accumulates fractional counts K1_i(x_t) * K1_j(x_{t+1}).
// Training does not clamp: a sample nobody covers is a coverage violation.
inline TransitionMatrix fem_train(const ScalarTrace& trace, const MembershipFamily& fam,
                                  AssignmentRule rule = AssignmentRule::argmax,
                                  ZeroRowPolicy policy = ZeroRowPolicy::self_loop) {
    trace.validate();
    if (trace.samples.size() < 2) throw ConfigError("fem_train: trace shorter than 2 samples");

    const auto memberships_or_throw = [&](std::size_t t) {
        std::vector<double> m = fam.eval_all(trace.samples[t]);
        double best = 0.0;
        for (double v : m) best = std::max(best, v);
        if (!(best > 0.0)) {
            throw CoverageError("coverage violation: sample " + std::to_string(t) + " (value " +
                                format_double(trace.samples[t]) + ") has zero membership everywhere");
        }
        return m;
    };

    if (rule == AssignmentRule::argmax) {
        std::vector<int> states(trace.samples.size());
        for (std::size_t t = 0; t < trace.samples.size(); ++t) {
            const auto m = memberships_or_throw(t);
            std::size_t arg = 0;
            for (std::size_t i = 1; i < m.size(); ++i) {
                if (m[i] > m[arg]) arg = i;
            }
            states[t] = static_cast<int>(arg);
        }
        return estimate(count_transitions(states, fam.n), policy);
    }

    std::vector<std::vector<double>> weights(fam.n, std::vector<double>(fam.n, 0.0));
    std::vector<double> prev = normalize(PossibilityVector{memberships_or_throw(0)}).k1;
    for (std::size_t t = 1; t < trace.samples.size(); ++t) {
        std::vector<double> cur = normalize(PossibilityVector{memberships_or_throw(t)}).k1;
        for (std::size_t i = 0; i < fam.n; ++i) {
            if (prev[i] == 0.0) continue;
            for (std::size_t j = 0; j < fam.n; ++j) weights[i][j] += prev[i] * cur[j];
        }
        prev = std::move(cur);
    }
    return estimate_from_weights(weights, policy);
}

// Trained predictor: family plus its transition matrix, serialized together.
struct FemBundle {
    MembershipFamily family;
    TransitionMatrix pi;

    nlohmann::json to_json() const {
        return nlohmann::json{{"family", family.to_json()}, {"pi", pi.to_json()}};
    }

    static FemBundle from_json(const nlohmann::json& j) {
        FemBundle b{MembershipFamily::from_json(j.at("family")),
                    TransitionMatrix::from_json(j.at("pi"))};
        if (b.family.n != b.pi.n()) throw ConfigError("fem bundle: family and matrix size differ");
        return b;
    }
};

}  // namespace quadsim
