#pragma once

// Prescriptive agent: stage-1 reward-maximizing action selection over a
// candidate set, stage-2 policy-consistency gating plus safety screening
// before an action may reach the real vehicle, and offline calibration of the
// real-vehicle policy table.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "quadsim/descriptive.hpp"
#include "quadsim/errors.hpp"
#include "quadsim/predictive.hpp"

namespace quadsim {

struct Candidate {
    int action_id = 0;   // index into the action vocabulary
    double accel = 0.0;  // physical command, m/s^2
};

// Observation snapshot the reward function sees.
struct DecisionContext {
    double position = 0.0;
    double speed = 0.0;
    double v_ref = 0.0;
    double dt = 1.0;
    std::optional<PredictionKnowledge> knowledge;
};

struct CandidateActionSet {
    std::vector<Candidate> candidates;
    DecisionContext context;
};

using RewardFn = std::function<double(const DecisionContext&, const Candidate&)>;

// argmax of the reward over candidates, ties to the lowest index.
inline std::size_t select_action(const CandidateActionSet& set, const RewardFn& reward) {
    if (set.candidates.empty()) throw ConfigError("select_action: empty candidate set");
    std::size_t arg = 0;
    double best = reward(set.context, set.candidates[0]);
    if (!std::isfinite(best)) throw NumericalError("select_action: non-finite reward");
    for (std::size_t k = 1; k < set.candidates.size(); ++k) {
        const double r = reward(set.context, set.candidates[k]);
        if (!std::isfinite(r)) throw NumericalError("select_action: non-finite reward");
        if (r > best) {
            best = r;
            arg = k;
        }
    }
    return arg;
}

// The executable state->action table checked by the gate ("what the real
// vehicle would do"). Kept separate from PolicyModel so calibration can move
// entries without breaking the argmax-of-reward invariant there.
struct TabularPolicy {
    int n_states = 0;
    int n_actions = 0;
    std::vector<int> action_of_state;

    int operator()(int state) const { return action_of_state.at(static_cast<std::size_t>(state)); }

    void validate() const {
        if (static_cast<int>(action_of_state.size()) != n_states) {
            throw ConfigError("tabular policy: size mismatch");
        }
        for (int a : action_of_state) {
            if (a < 0 || a >= n_actions) throw ConfigError("tabular policy: action out of range");
        }
    }

    static TabularPolicy from_model(const PolicyModel& m) {
        TabularPolicy p{m.n_states, m.n_actions, m.p_map};
        p.validate();
        return p;
    }
};

struct SafetyLimits {
    double v_max = 0.0;
    double a_min = 0.0;
    double a_max = 0.0;
    double d_min = 0.0;
    double dt = 1.0;
};

struct SafetyState {
    double speed = 0.0;
    std::optional<double> gap_to_leader;  // bumper gap, m
    std::optional<double> leader_speed;
};

struct GateDecision {
    Candidate chosen;
    bool accepted = false;
    std::vector<std::string> reasons;  // empty iff accepted
    double stage2_residual = 0.0;      // |a - P_R(F_A(a))| in action-index units

    nlohmann::json to_json() const {
        return {{"action_id", chosen.action_id}, {"accel", chosen.accel},
                {"accepted", accepted}, {"reasons", reasons},
                {"stage2_residual", stage2_residual}};
    }
};

// Stage-2 check: the candidate action, pushed through the learned induction
// map and back through the real-vehicle policy, must land within epsilon of
// itself; plus kinematic safety predicates. Null models skip the residual
// check (nothing learned yet).
inline GateDecision gate(const Candidate& action, const TabularPolicy* real_policy,
                         const InductionModel* induction, double epsilon,
                         const SafetyLimits& limits, const SafetyState& state) {
    GateDecision d;
    d.chosen = action;
    if (real_policy != nullptr && induction != nullptr) {
        if (real_policy->n_states != induction->n_states ||
            real_policy->n_actions != induction->n_actions) {
            throw ConfigError("gate: policy/induction vocabulary mismatch");
        }
        if (action.action_id < 0 || action.action_id >= induction->n_actions) {
            throw ConfigError("gate: action outside the shared vocabulary");
        }
        const int round_trip = (*real_policy)(induction->predict_state(action.action_id));
        d.stage2_residual = std::abs(action.action_id - round_trip);
        if (d.stage2_residual > epsilon) d.reasons.emplace_back("policy residual");
    }

    const double v_next = state.speed + action.accel * limits.dt;
    if (v_next < -1e-9 || v_next > limits.v_max + 1e-9) d.reasons.emplace_back("speed");
    if (action.accel < limits.a_min - 1e-9 || action.accel > limits.a_max + 1e-9) {
        d.reasons.emplace_back("accel");
    }
    if (state.gap_to_leader.has_value()) {
        const double v_lead = state.leader_speed.value_or(0.0);
        // One-step projection with the post-action follower speed.
        const double predicted_gap = *state.gap_to_leader + (v_lead - v_next) * limits.dt;
        if (predicted_gap < limits.d_min) d.reasons.emplace_back("headway");
    }
    d.accepted = d.reasons.empty();
    return d;
}

struct CalibrationResult {
    TabularPolicy policy;
    double d_f = 0.0;            // mean |a - P_R(F_A(a))| after calibration
    std::size_t violations = 0;  // residuals above epsilon
    std::size_t iterations = 0;  // sweeps that changed at least one entry
};

// Coordinate updates on the policy table that only ever reduce the violation
// count; entries are left alone when no strictly better action exists.
inline CalibrationResult calibrate(const StateActionTrajectory& traj,
                                   const InductionModel& induction, TabularPolicy policy,
                                   double epsilon, std::size_t max_iters) {
    traj.validate();
    policy.validate();
    if (policy.n_states != induction.n_states || policy.n_actions != induction.n_actions ||
        traj.n_states != induction.n_states || traj.n_actions != induction.n_actions) {
        throw ConfigError("calibrate: vocabulary mismatch");
    }
    const auto n_states = static_cast<std::size_t>(policy.n_states);
    const auto n_actions = static_cast<std::size_t>(policy.n_actions);

    // How often each observed action maps (through the induction) to each state.
    std::vector<std::vector<std::uint64_t>> hits(n_states,
                                                 std::vector<std::uint64_t>(n_actions, 0));
    for (std::size_t t = 0; t + 1 < traj.steps.size(); ++t) {
        const int a = traj.steps[t].action;
        const auto s = static_cast<std::size_t>(induction.predict_state(a));
        ++hits[s][static_cast<std::size_t>(a)];
    }

    const auto state_violations = [&](std::size_t s, int choice) {
        std::uint64_t v = 0;
        for (std::size_t a = 0; a < n_actions; ++a) {
            if (std::abs(static_cast<int>(a) - choice) > epsilon) v += hits[s][a];
        }
        return v;
    };

    std::size_t sweeps = 0;
    for (std::size_t it = 0; it < max_iters; ++it) {
        bool changed = false;
        for (std::size_t s = 0; s < n_states; ++s) {
            const int current = policy.action_of_state[s];
            const std::uint64_t current_v = state_violations(s, current);
            std::uint64_t best_v = current_v;
            int best_a = current;
            for (std::size_t a = 0; a < n_actions; ++a) {
                const auto cand = static_cast<int>(a);
                if (cand == current) continue;
                const std::uint64_t v = state_violations(s, cand);
                if (v < best_v) {  // strictly better only; ties keep the table stable
                    best_v = v;
                    best_a = cand;
                }
            }
            if (best_a != current) {
                policy.action_of_state[s] = best_a;
                changed = true;
            }
        }
        if (!changed) break;
        ++sweeps;
    }

    CalibrationResult result{std::move(policy), 0.0, 0, sweeps};
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t + 1 < traj.steps.size(); ++t) {
        const int a = traj.steps[t].action;
        const double r =
            std::abs(a - result.policy(induction.predict_state(a)));
        sum += r;
        if (r > epsilon) ++result.violations;
        ++count;
    }
    result.d_f = (count > 0) ? sum / static_cast<double>(count) : 0.0;
    return result;
}

}  // namespace quadsim
