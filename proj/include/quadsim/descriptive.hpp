#pragma once

// Descriptive agent: learns a tabular induction function (action -> likeliest
// next state) and a tabular policy (state -> best-reward action) from observed
// trajectories, and measures how self-consistent the two are.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "quadsim/errors.hpp"
#include "quadsim/trace.hpp"

namespace quadsim {

struct InductionModel {
    int n_actions = 0;
    int n_states = 0;
    std::vector<std::vector<double>> likelihood;  // [action][next state], rows sum to 1 or unobserved
    std::vector<bool> observed;                   // per action
    std::vector<int> f_map;                       // argmax next state per action, ties to lower

    int predict_state(int action) const { return f_map.at(static_cast<std::size_t>(action)); }

    void validate(double tol = 1e-12) const {
        for (int a = 0; a < n_actions; ++a) {
            const auto& row = likelihood[static_cast<std::size_t>(a)];
            double sum = 0.0;
            for (double v : row) {
                if (v < 0.0) throw ConfigError("induction model: negative likelihood");
                sum += v;
            }
            if (observed[static_cast<std::size_t>(a)] && std::abs(sum - 1.0) > tol) {
                throw ConfigError("induction model: observed row does not sum to 1");
            }
        }
    }

    nlohmann::json to_json() const {
        return {{"n_actions", n_actions}, {"n_states", n_states}, {"likelihood", likelihood},
                {"observed", observed}, {"f_map", f_map}};
    }
};

struct PolicyModel {
    int n_states = 0;
    int n_actions = 0;
    std::vector<std::vector<double>> reward;        // [state][action], empirical mean return
    std::vector<std::vector<bool>> observed;        // per (state, action)
    std::vector<int> p_map;                         // argmax action per state, unobserved = -inf

    int predict_action(int state) const { return p_map.at(static_cast<std::size_t>(state)); }

    nlohmann::json to_json() const {
        return {{"n_states", n_states}, {"n_actions", n_actions}, {"reward", reward},
                {"observed", observed}, {"p_map", p_map}};
    }
};

struct ConsistencyReport {
    double d_state = 0.0;           // mean |s' - F(P(s'))|
    double d_action = 0.0;          // mean |a' - P(F(a'))|
    std::size_t g_f_violations = 0; // steps with |s_next - F(a)| > eps_f
    std::size_t g_p_violations = 0; // steps with |a - P(s)| > eps_p
    std::size_t evaluated = 0;      // transition count

    std::size_t violations() const { return g_f_violations + g_p_violations; }

    nlohmann::json to_json() const {
        return {{"d_state", d_state}, {"d_action", d_action},
                {"g_f_violations", g_f_violations}, {"g_p_violations", g_p_violations},
                {"evaluated", evaluated}};
    }

    std::string to_text() const {
        std::string out;
        out += "d_state          " + format_double(d_state) + "\n";
        out += "d_action         " + format_double(d_action) + "\n";
        out += "g_f_violations   " + std::to_string(g_f_violations) + "\n";
        out += "g_p_violations   " + std::to_string(g_p_violations) + "\n";
        out += "evaluated        " + std::to_string(evaluated) + "\n";
        return out;
    }
};

namespace detail {

// Transitions usable for learning: step t pairs (s_t, a_t, r_t) with landing
// state s_{t+1}. The final record only closes the last transition.
template <typename Keep>
InductionModel fit_induction(const StateActionTrajectory& traj, const Keep& keep,
                             const InductionModel* fallback = nullptr) {
    InductionModel m;
    m.n_actions = traj.n_actions;
    m.n_states = traj.n_states;
    m.likelihood.assign(static_cast<std::size_t>(traj.n_actions),
                        std::vector<double>(static_cast<std::size_t>(traj.n_states), 0.0));
    m.observed.assign(static_cast<std::size_t>(traj.n_actions), false);
    std::vector<std::vector<std::uint64_t>> counts(
        static_cast<std::size_t>(traj.n_actions),
        std::vector<std::uint64_t>(static_cast<std::size_t>(traj.n_states), 0));
    std::vector<std::uint64_t> totals(static_cast<std::size_t>(traj.n_actions), 0);
    for (std::size_t t = 0; t + 1 < traj.steps.size(); ++t) {
        if (!keep(t)) continue;
        const auto a = static_cast<std::size_t>(traj.steps[t].action);
        const auto s_next = static_cast<std::size_t>(traj.steps[t + 1].state);
        ++counts[a][s_next];
        ++totals[a];
    }
    for (std::size_t a = 0; a < counts.size(); ++a) {
        if (totals[a] > 0) {
            m.observed[a] = true;
            for (std::size_t s = 0; s < counts[a].size(); ++s) {
                m.likelihood[a][s] =
                    static_cast<double>(counts[a][s]) / static_cast<double>(totals[a]);
            }
        } else if (fallback != nullptr && fallback->observed[a]) {
            m.observed[a] = true;
            m.likelihood[a] = fallback->likelihood[a];
        }
    }
    m.f_map.resize(static_cast<std::size_t>(traj.n_actions));
    for (std::size_t a = 0; a < m.likelihood.size(); ++a) {
        std::size_t arg = 0;
        for (std::size_t s = 1; s < m.likelihood[a].size(); ++s) {
            if (m.likelihood[a][s] > m.likelihood[a][arg]) arg = s;
        }
        m.f_map[a] = static_cast<int>(arg);
    }
    return m;
}

template <typename Keep>
PolicyModel fit_policy(const StateActionTrajectory& traj, double gamma, const Keep& keep,
                       const PolicyModel* fallback = nullptr) {
    const std::size_t len = traj.steps.size() - 1;  // usable steps
    // Discounted return from each step, summed over the remaining usable steps.
    std::vector<double> g(len, 0.0);
    double acc = 0.0;
    for (std::size_t t = len; t-- > 0;) {
        acc = traj.steps[t].reward + gamma * acc;
        g[t] = acc;
    }
    PolicyModel m;
    m.n_states = traj.n_states;
    m.n_actions = traj.n_actions;
    m.reward.assign(static_cast<std::size_t>(traj.n_states),
                    std::vector<double>(static_cast<std::size_t>(traj.n_actions), 0.0));
    m.observed.assign(static_cast<std::size_t>(traj.n_states),
                      std::vector<bool>(static_cast<std::size_t>(traj.n_actions), false));
    std::vector<std::vector<double>> sums(
        static_cast<std::size_t>(traj.n_states),
        std::vector<double>(static_cast<std::size_t>(traj.n_actions), 0.0));
    std::vector<std::vector<std::uint64_t>> cnt(
        static_cast<std::size_t>(traj.n_states),
        std::vector<std::uint64_t>(static_cast<std::size_t>(traj.n_actions), 0));
    for (std::size_t t = 0; t < len; ++t) {
        if (!keep(t)) continue;
        const auto s = static_cast<std::size_t>(traj.steps[t].state);
        const auto a = static_cast<std::size_t>(traj.steps[t].action);
        sums[s][a] += g[t];
        ++cnt[s][a];
    }
    for (std::size_t s = 0; s < sums.size(); ++s) {
        for (std::size_t a = 0; a < sums[s].size(); ++a) {
            if (cnt[s][a] > 0) {
                m.reward[s][a] = sums[s][a] / static_cast<double>(cnt[s][a]);
                m.observed[s][a] = true;
            } else if (fallback != nullptr && fallback->observed[s][a]) {
                m.reward[s][a] = fallback->reward[s][a];
                m.observed[s][a] = true;
            }
        }
    }
    m.p_map.resize(static_cast<std::size_t>(traj.n_states));
    for (std::size_t s = 0; s < sums.size(); ++s) {
        // Never pick an action unseen in this state; fully unseen states get 0.
        int arg = 0;
        double best = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (std::size_t a = 0; a < sums[s].size(); ++a) {
            if (!m.observed[s][a]) continue;
            if (!any || m.reward[s][a] > best) {
                best = m.reward[s][a];
                arg = static_cast<int>(a);
                any = true;
            }
        }
        m.p_map[s] = arg;
    }
    return m;
}

}  // namespace detail

// Empirical induction + policy tables with discounted-return rewards.
inline std::pair<InductionModel, PolicyModel> fit(const StateActionTrajectory& traj,
                                                  double gamma = 0.9) {
    traj.validate();
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("fit: gamma must be in [0, 1)");
    const auto keep_all = [](std::size_t) { return true; };
    return {detail::fit_induction(traj, keep_all), detail::fit_policy(traj, gamma, keep_all)};
}

inline ConsistencyReport consistency(const InductionModel& f, const PolicyModel& p,
                                     const StateActionTrajectory& eval_traj, double eps_f,
                                     double eps_p) {
    eval_traj.validate();
    if (f.n_states != eval_traj.n_states || f.n_actions != eval_traj.n_actions ||
        p.n_states != eval_traj.n_states || p.n_actions != eval_traj.n_actions) {
        throw ConfigError("consistency: model/trajectory dimension mismatch");
    }
    ConsistencyReport rep;
    rep.evaluated = eval_traj.transitions();
    double sum_ds = 0.0, sum_da = 0.0;
    for (std::size_t t = 0; t + 1 < eval_traj.steps.size(); ++t) {
        const int s_cur = eval_traj.steps[t].state;
        const int a_cur = eval_traj.steps[t].action;
        const int s_next = eval_traj.steps[t + 1].state;
        sum_ds += std::abs(s_next - f.predict_state(p.predict_action(s_next)));
        sum_da += std::abs(a_cur - p.predict_action(f.predict_state(a_cur)));
        if (std::abs(s_next - f.predict_state(a_cur)) > eps_f) ++rep.g_f_violations;
        if (std::abs(a_cur - p.predict_action(s_cur)) > eps_p) ++rep.g_p_violations;
    }
    rep.d_state = sum_ds / static_cast<double>(rep.evaluated);
    rep.d_action = sum_da / static_cast<double>(rep.evaluated);
    return rep;
}

struct RefitResult {
    InductionModel induction;
    PolicyModel policy;
    ConsistencyReport report;
    std::size_t rounds = 0;
};

namespace detail {

// Ordering used to keep the best checkpoint: violation count first, then the
// summed residuals.
inline bool lex_better(const ConsistencyReport& a, const ConsistencyReport& b) {
    if (a.violations() != b.violations()) return a.violations() < b.violations();
    return a.d_state + a.d_action < b.d_state + b.d_action;
}

}  // namespace detail

// Alternating refinement: refit the induction table on steps whose action
// matches the current policy, then refit the reward table on steps whose
// landing state matches the new induction map. Keeps the best checkpoint.
inline RefitResult refit_until_consistent(const StateActionTrajectory& traj,
                                          const StateActionTrajectory& eval_traj, double eps_f,
                                          double eps_p, std::size_t max_rounds,
                                          double gamma = 0.9) {
    if (max_rounds < 1) throw ConfigError("refit_until_consistent: max_rounds must be >= 1");
    auto [f, p] = fit(traj, gamma);
    ConsistencyReport report = consistency(f, p, eval_traj, eps_f, eps_p);

    RefitResult best{f, p, report, 0};
    double prev_obj = report.d_state + report.d_action;
    std::size_t rounds_done = 0;

    for (std::size_t round = 1; round <= max_rounds; ++round) {
        const PolicyModel& p_cur = p;
        const auto keep_f = [&](std::size_t t) {
            return std::abs(traj.steps[t].action - p_cur.predict_action(traj.steps[t].state)) <=
                   eps_p;
        };
        InductionModel f_next = detail::fit_induction(traj, keep_f, &f);
        const auto keep_p = [&](std::size_t t) {
            return std::abs(traj.steps[t + 1].state - f_next.predict_state(traj.steps[t].action)) <=
                   eps_f;
        };
        PolicyModel p_next = detail::fit_policy(traj, gamma, keep_p, &p);

        f = std::move(f_next);
        p = std::move(p_next);
        report = consistency(f, p, eval_traj, eps_f, eps_p);
        if (detail::lex_better(report, best.report)) best = RefitResult{f, p, report, round};
        rounds_done = round;

        const double obj = report.d_state + report.d_action;
        const double scale = std::max({std::abs(obj), std::abs(prev_obj), 1e-30});
        if (std::abs(obj - prev_obj) / scale < 1e-6) break;
        prev_obj = obj;
    }
    best.rounds = rounds_done;
    return best;
}

}  // namespace quadsim
