#pragma once

// Predictive agent: an ensemble of forecasters (fuzzy-encoded predictor or
// persistence baseline), each scored by a named cost over its predicted
// trajectory. Also the train/evaluate harness for power-demand prediction.

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "quadsim/errors.hpp"
#include "quadsim/fuzzy.hpp"
#include "quadsim/trace.hpp"

namespace quadsim {

enum class ForecasterKind { persistence, fem };

// Multi-step strategy: refuzzify feeds each decoded value back through the
// encoder; propagate advances the fuzzy probability vector and decodes at
// every step without re-encoding.
enum class ForecastMode { refuzzify, propagate };

struct PredictiveMember {
    int id = 0;
    ForecasterKind kind = ForecasterKind::persistence;
    std::optional<FemBundle> bundle;  // required when kind == fem
    ForecastMode mode = ForecastMode::refuzzify;
    int horizon_steps = 1;
    std::string objective = "energy";
    double objective_ref = 0.0;  // reference value for tracking cost
};

inline double objective_cost(const std::string& name, std::span<const double> traj, double dt,
                             double ref = 0.0) {
    if (name == "energy") {
        double sum = 0.0;
        for (double x : traj) sum += std::max(0.0, x) * dt;
        return sum;
    }
    if (name == "tracking") {
        double sum = 0.0;
        for (double x : traj) sum += (x - ref) * (x - ref) * dt;
        return sum;
    }
    throw ConfigError("unknown objective: '" + name + "'");
}

// Iterated one-step prediction; step k+1 is produced from the member's own
// step-k output.
inline std::vector<double> forecast(const PredictiveMember& member, double current_value) {
    if (member.horizon_steps < 1) throw ConfigError("forecast: horizon_steps must be >= 1");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(member.horizon_steps));
    if (member.kind == ForecasterKind::persistence) {
        out.assign(static_cast<std::size_t>(member.horizon_steps), current_value);
        return out;
    }
    if (!member.bundle.has_value()) {
        throw ConfigError("forecast: member " + std::to_string(member.id) +
                          " has an untrained forecaster");
    }
    const auto& fam = member.bundle->family;
    const auto& pi = member.bundle->pi;
    if (member.mode == ForecastMode::refuzzify) {
        double x = current_value;
        for (int k = 0; k < member.horizon_steps; ++k) {
            x = fem_predict(x, fam, pi, 1);
            out.push_back(x);
        }
    } else {
        FuzzyProbabilityVector w = normalize(fuzzify(current_value, fam));
        for (int k = 0; k < member.horizon_steps; ++k) {
            w = fem_step(w, pi);
            out.push_back(fem_decode(w, fam));
        }
    }
    return out;
}

struct MemberPrediction {
    int id = 0;
    std::vector<double> trajectory;
    double cost = 0.0;
};

struct PredictionKnowledge {
    std::vector<MemberPrediction> members;
    int best_member = 0;  // argmin cost, ties to the lower id

    const MemberPrediction& best() const {
        for (const auto& m : members) {
            if (m.id == best_member) return m;
        }
        throw ConfigError("prediction knowledge: best member missing");
    }

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& m : members) {
            arr.push_back({{"id", m.id}, {"cost", m.cost}, {"trajectory", m.trajectory}});
        }
        return {{"members", arr}, {"best_member", best_member}};
    }
};

inline PredictionKnowledge evaluate_ensemble(const std::vector<PredictiveMember>& members,
                                             double current_value, double dt) {
    if (members.empty()) throw ConfigError("evaluate_ensemble: no members");
    PredictionKnowledge knowledge;
    knowledge.members.reserve(members.size());
    for (const auto& member : members) {
        try {
            MemberPrediction pred;
            pred.id = member.id;
            pred.trajectory = forecast(member, current_value);
            pred.cost = objective_cost(member.objective, pred.trajectory, dt, member.objective_ref);
            if (!std::isfinite(pred.cost)) throw NumericalError("non-finite objective cost");
            knowledge.members.push_back(std::move(pred));
        } catch (const std::exception& e) {
            throw ConfigError("ensemble member " + std::to_string(member.id) + ": " + e.what());
        }
    }
    const MemberPrediction* best = &knowledge.members.front();
    for (const auto& m : knowledge.members) {
        if (m.cost < best->cost || (m.cost == best->cost && m.id < best->id)) best = &m;
    }
    knowledge.best_member = best->id;
    return knowledge;
}

inline double rmse(std::span<const double> predicted, std::span<const double> actual) {
    if (predicted.size() != actual.size() || predicted.empty()) {
        throw ConfigError("rmse: size mismatch or empty");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double d = predicted[i] - actual[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(predicted.size()));
}

// Train-on-prefix / evaluate-on-suffix report for one-step and long-horizon
// prediction against the persistence baseline.
struct PowerPredictionReport {
    double dt = 1.0;
    int horizon_steps = 1;
    std::size_t train_len = 0;
    // One-step rows: prediction target at time t_one[i].
    std::vector<double> t_one, actual_one, fem_one, persist_one;
    // Horizon rows: prediction target horizon_steps ahead.
    std::vector<double> t_hor, actual_hor, fem_hor, persist_hor;
    double rmse_fem_one = 0.0, rmse_persist_one = 0.0;
    double rmse_fem_hor = 0.0, rmse_persist_hor = 0.0;

    nlohmann::json to_json() const {
        return {{"dt", dt},
                {"horizon_steps", horizon_steps},
                {"train_len", train_len},
                {"one_step", {{"t", t_one}, {"actual", actual_one}, {"fem", fem_one},
                              {"persistence", persist_one}}},
                {"horizon", {{"t", t_hor}, {"actual", actual_hor}, {"fem", fem_hor},
                             {"persistence", persist_hor}}},
                {"rmse", {{"fem_one_step", rmse_fem_one}, {"persistence_one_step", rmse_persist_one},
                          {"fem_horizon", rmse_fem_hor}, {"persistence_horizon", rmse_persist_hor}}}};
    }

    static std::string csv(const std::vector<double>& t, const std::vector<double>& actual,
                           const std::vector<double>& fem, const std::vector<double>& persist) {
        std::string out = "t,actual,fem,persistence\n";
        for (std::size_t i = 0; i < t.size(); ++i) {
            out += format_double(t[i]) + ',' + format_double(actual[i]) + ',' +
                   format_double(fem[i]) + ',' + format_double(persist[i]) + '\n';
        }
        return out;
    }

    std::string one_step_csv() const { return csv(t_one, actual_one, fem_one, persist_one); }
    std::string horizon_csv() const { return csv(t_hor, actual_hor, fem_hor, persist_hor); }
};

inline PowerPredictionReport predict_power_demand(const ScalarTrace& trace,
                                                  const MembershipFamily& family,
                                                  double split_fraction, double horizon_seconds,
                                                  AssignmentRule rule = AssignmentRule::argmax) {
    trace.validate();
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
        throw ConfigError("predict_power_demand: split_fraction must be in (0, 1)");
    }
    const double steps_exact = horizon_seconds / trace.dt;
    const int horizon_steps = static_cast<int>(std::llround(steps_exact));
    if (horizon_steps < 1 || std::abs(steps_exact - horizon_steps) > 1e-9) {
        throw ConfigError("predict_power_demand: horizon must be a positive multiple of dt");
    }
    const std::size_t len = trace.samples.size();
    const auto train_len = static_cast<std::size_t>(static_cast<double>(len) * split_fraction);
    if (train_len < 2) throw ConfigError("predict_power_demand: training split too short");
    const auto h = static_cast<std::size_t>(horizon_steps);
    if (train_len + h >= len) {
        throw ConfigError("predict_power_demand: evaluation split shorter than horizon");
    }

    ScalarTrace train;
    train.dt = trace.dt;
    train.label = trace.label + ":train";
    train.samples.assign(trace.samples.begin(),
                         trace.samples.begin() + static_cast<std::ptrdiff_t>(train_len));
    const TransitionMatrix pi = fem_train(train, family, rule);

    PowerPredictionReport rep;
    rep.dt = trace.dt;
    rep.horizon_steps = horizon_steps;
    rep.train_len = train_len;

    for (std::size_t t = train_len; t + 1 < len; ++t) {
        rep.t_one.push_back(static_cast<double>(t + 1) * trace.dt);
        rep.actual_one.push_back(trace.samples[t + 1]);
        rep.fem_one.push_back(fem_predict(trace.samples[t], family, pi, 1));
        rep.persist_one.push_back(trace.samples[t]);
    }
    for (std::size_t t = train_len; t + h < len; ++t) {
        double x = trace.samples[t];
        for (std::size_t k = 0; k < h; ++k) x = fem_predict(x, family, pi, 1);
        rep.t_hor.push_back(static_cast<double>(t + h) * trace.dt);
        rep.actual_hor.push_back(trace.samples[t + h]);
        rep.fem_hor.push_back(x);
        rep.persist_hor.push_back(trace.samples[t]);
    }
    rep.rmse_fem_one = rmse(rep.fem_one, rep.actual_one);
    rep.rmse_persist_one = rmse(rep.persist_one, rep.actual_one);
    rep.rmse_fem_hor = rmse(rep.fem_hor, rep.actual_hor);
    rep.rmse_persist_hor = rmse(rep.persist_hor, rep.actual_hor);
    return rep;
}

}  // namespace quadsim
