#pragma once

// Sampled scalar signals, crisp state spaces and state-action trajectories,
// with file ingestion and synthetic generators.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "quadsim/errors.hpp"
#include "quadsim/io.hpp"
#include "quadsim/rng.hpp"

namespace quadsim {

// Uniformly sampled real-valued signal (kW, m/s, ...).
struct ScalarTrace {
    std::vector<double> samples;
    double dt = 1.0;       // sampling period, seconds
    std::string label;

    void validate() const {
        if (samples.empty()) throw ConfigError("trace '" + label + "': no samples");
        if (!(dt > 0.0) || !std::isfinite(dt)) {
            throw ConfigError("trace '" + label + "': dt must be > 0");
        }
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (!std::isfinite(samples[i])) {
                throw ConfigError("trace '" + label + "': non-finite sample at index " +
                                  std::to_string(i));
            }
        }
    }
};

// Ordered discrete levels over a bounded interval.
struct CrispStateSpace {
    std::vector<double> levels;        // strictly increasing
    std::array<double, 2> bounds{0.0, 1.0};

    std::size_t size() const { return levels.size(); }

    void validate() const {
        if (levels.size() < 2) throw ConfigError("state space needs at least 2 levels");
        for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
            if (!(levels[i] < levels[i + 1])) {
                throw ConfigError("state space levels must be strictly increasing");
            }
        }
        if (!(bounds[0] <= levels.front()) || !(levels.back() <= bounds[1])) {
            throw ConfigError("state space levels must lie within bounds");
        }
    }

    // n levels evenly spaced, endpoints included.
    static CrispStateSpace even(std::size_t n, double lo, double hi) {
        if (n < 2 || !(lo < hi)) throw ConfigError("even state space: need n >= 2 and lo < hi");
        CrispStateSpace s;
        s.bounds = {lo, hi};
        s.levels.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            s.levels[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
        }
        return s;
    }

    // Centers of n equal-width cells over [lo, hi].
    static CrispStateSpace cell_centers(std::size_t n, double lo, double hi) {
        if (n < 2 || !(lo < hi)) throw ConfigError("cell state space: need n >= 2 and lo < hi");
        CrispStateSpace s;
        s.bounds = {lo, hi};
        const double w = (hi - lo) / static_cast<double>(n);
        s.levels.resize(n);
        for (std::size_t i = 0; i < n; ++i) s.levels[i] = lo + w * (static_cast<double>(i) + 0.5);
        return s;
    }
};

// Nearest level, exact ties resolved toward the lower index.
inline int quantize_value(double x, const CrispStateSpace& space) {
    const auto& lv = space.levels;
    const auto it = std::lower_bound(lv.begin(), lv.end(), x);
    if (it == lv.begin()) return 0;
    if (it == lv.end()) return static_cast<int>(lv.size()) - 1;
    const auto hi = static_cast<int>(it - lv.begin());
    const int lo = hi - 1;
    const double d_lo = x - lv[lo];
    const double d_hi = lv[hi] - x;
    return (d_lo <= d_hi) ? lo : hi;
}

inline std::vector<int> quantize(const ScalarTrace& trace, const CrispStateSpace& space) {
    trace.validate();
    space.validate();
    std::vector<int> out;
    out.reserve(trace.samples.size());
    for (double x : trace.samples) out.push_back(quantize_value(x, space));
    return out;
}

struct TrajectoryStep {
    int state = 0;
    int action = 0;
    double reward = 0.0;
};

// Discrete (state, action, reward) sequence. The final record only closes the
// last transition; its action and reward fields are not used by learners.
struct StateActionTrajectory {
    std::vector<TrajectoryStep> steps;
    int n_states = 0;
    int n_actions = 0;

    std::size_t transitions() const { return steps.empty() ? 0 : steps.size() - 1; }

    void validate() const {
        if (steps.size() < 2) throw ConfigError("trajectory needs at least 2 steps");
        if (n_states < 1 || n_actions < 1) throw ConfigError("trajectory: empty state/action set");
        for (std::size_t i = 0; i < steps.size(); ++i) {
            const auto& st = steps[i];
            if (st.state < 0 || st.state >= n_states) {
                throw ConfigError("trajectory: state id out of range at step " + std::to_string(i));
            }
            if (st.action < 0 || st.action >= n_actions) {
                throw ConfigError("trajectory: action id out of range at step " + std::to_string(i));
            }
            if (!std::isfinite(st.reward)) {
                throw ConfigError("trajectory: non-finite reward at step " + std::to_string(i));
            }
        }
    }
};

enum class TraceFormat { csv, json };

// CSV: header "t,value", uniformly spaced t (tolerance 1e-9 * dt).
// JSON: {"dt": <num>, "samples": [...], "label": <string>}.
inline ScalarTrace load_trace(const std::filesystem::path& path, TraceFormat format) {
    const std::string text = read_text_file(path);
    ScalarTrace trace;
    trace.label = path.stem().string();

    if (format == TraceFormat::json) {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
        if (!doc.contains("dt") || !doc.contains("samples")) {
            throw ConfigError(path.string() + ": trace JSON needs 'dt' and 'samples'");
        }
        trace.dt = doc.at("dt").get<double>();
        trace.samples = doc.at("samples").get<std::vector<double>>();
        if (doc.contains("label")) trace.label = doc.at("label").get<std::string>();
        trace.validate();
        return trace;
    }

    std::vector<double> times;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        start = end + 1;
        ++line_no;
        if (line.empty()) {
            if (start > text.size()) break;
            continue;
        }
        if (line_no == 1) {
            if (line != "t,value") {
                throw ConfigError(path.string() + ": expected CSV header 't,value', got '" + line + "'");
            }
            continue;
        }
        const auto cells = split(line, ',');
        if (cells.size() != 2) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected 2 columns");
        }
        times.push_back(parse_double(cells[0]));
        trace.samples.push_back(parse_double(cells[1]));
    }
    if (times.size() < 2) {
        throw ConfigError(path.string() + ": need at least two rows to infer dt");
    }
    trace.dt = times[1] - times[0];
    if (!(trace.dt > 0.0)) throw ConfigError(path.string() + ": non-increasing timestamps");
    for (std::size_t i = 0; i + 1 < times.size(); ++i) {
        const double step = times[i + 1] - times[i];
        if (std::abs(step - trace.dt) > 1e-9 * trace.dt) {
            throw ConfigError(path.string() + ": non-uniform sampling at row " + std::to_string(i + 2));
        }
    }
    trace.validate();
    return trace;
}

inline void save_trace(const ScalarTrace& trace, const std::filesystem::path& path,
                       TraceFormat format) {
    trace.validate();
    if (format == TraceFormat::json) {
        nlohmann::json doc;
        doc["dt"] = trace.dt;
        doc["samples"] = trace.samples;
        doc["label"] = trace.label;
        write_text_file(path, doc.dump(2) + "\n");
        return;
    }
    std::string out = "t,value\n";
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        out += format_double(static_cast<double>(i) * trace.dt);
        out += ',';
        out += format_double(trace.samples[i]);
        out += '\n';
    }
    write_text_file(path, out);
}

enum class SynthKind { constant, sine, ar1, drive_cycle_like };

inline SynthKind synth_kind_from_string(const std::string& s) {
    if (s == "constant") return SynthKind::constant;
    if (s == "sine") return SynthKind::sine;
    if (s == "ar1") return SynthKind::ar1;
    if (s == "drive_cycle_like") return SynthKind::drive_cycle_like;
    throw ConfigError("unknown synthetic trace kind: '" + s + "'");
}

struct SynthParams {
    double dt = 1.0;
    double value = 0.0;    // constant
    double amp = 1.0;      // sine
    double period = 10.0;  // sine, counted in samples
    double offset = 0.0;   // sine
    double phi = 0.9;      // ar1
    double sigma = 1.0;    // ar1
    double x0 = 0.0;       // ar1
};

namespace detail {

inline ScalarTrace synth_drive_cycle(const SynthParams& p, std::uint64_t seed, std::size_t length) {
    // Speed profile with piecewise-constant random targets, converted to a
    // power-like signal through a fixed longitudinal proxy and clamped at 0.
    constexpr double mass = 1500.0;   // kg
    constexpr double c0 = 0.8;        // kW idle/auxiliary
    constexpr double c1 = 0.045;      // kW per m/s
    constexpr double c3 = 0.00035;    // kW per (m/s)^3
    Rng rng(seed);
    ScalarTrace trace;
    trace.dt = p.dt;
    trace.label = "drive_cycle_like";
    trace.samples.reserve(length);
    double v = rng.uniform(4.0, 10.0);
    double target = rng.uniform(3.0, 16.0);
    double hold_left = rng.uniform(8.0, 30.0);  // seconds until next target
    for (std::size_t i = 0; i < length; ++i) {
        if (hold_left <= 0.0) {
            target = rng.uniform(3.0, 16.0);
            hold_left = rng.uniform(8.0, 30.0);
        }
        const double err = target - v;
        double a = std::clamp(0.35 * err, -1.8, 1.2) + 0.15 * rng.normal();
        a = std::clamp(a, -2.5, 2.0);
        const double power_w = mass * a * v;
        const double power_kw = power_w / 1000.0 + c0 + c1 * v + c3 * v * v * v;
        trace.samples.push_back(std::max(0.0, power_kw));
        v = std::max(0.0, v + a * p.dt);
        hold_left -= p.dt;
    }
    return trace;
}

}  // namespace detail

// Deterministic given (kind, params, seed).
inline ScalarTrace synth_trace(SynthKind kind, const SynthParams& params, std::uint64_t seed,
                               std::size_t length) {
    if (length < 1) throw ConfigError("synth_trace: length must be >= 1");
    if (!(params.dt > 0.0)) throw ConfigError("synth_trace: dt must be > 0");
    ScalarTrace trace;
    trace.dt = params.dt;
    switch (kind) {
        case SynthKind::constant: {
            trace.label = "constant";
            trace.samples.assign(length, params.value);
            break;
        }
        case SynthKind::sine: {
            if (!(params.period > 0.0)) throw ConfigError("synth_trace: sine period must be > 0");
            trace.label = "sine";
            trace.samples.resize(length);
            for (std::size_t i = 0; i < length; ++i) {
                trace.samples[i] = params.offset +
                                   params.amp * std::sin(2.0 * std::numbers::pi *
                                                         static_cast<double>(i) / params.period);
            }
            break;
        }
        case SynthKind::ar1: {
            trace.label = "ar1";
            trace.samples.resize(length);
            Rng rng(seed);
            double x = params.x0;
            for (std::size_t i = 0; i < length; ++i) {
                trace.samples[i] = x;
                x = params.phi * x + params.sigma * rng.normal();
            }
            break;
        }
        case SynthKind::drive_cycle_like: {
            trace = detail::synth_drive_cycle(params, seed, length);
            break;
        }
    }
    trace.validate();
    return trace;
}

}  // namespace quadsim
