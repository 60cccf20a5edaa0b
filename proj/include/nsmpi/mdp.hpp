#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsmpi {

/// Value function over states, indexed 0..num_states-1.
using ValueFunction = std::vector<double>;

/// Deterministic stationary policy: action index per state.
using StationaryPolicy = std::vector<int>;

/// One sparse transition entry: probability of moving to next_state.
struct Transition {
    int next_state;
    double probability;
};

/// Periodic (non-stationary) policy stored newest-first: cycle[0] acts at
/// phase 0, cycle[1] at phase 1, and so on, wrapping after cycle.size() steps.
struct PeriodicPolicy {
    std::vector<StationaryPolicy> cycle;

    std::size_t period() const { return cycle.size(); }
};

/// Finite discounted MDP with sparse transition rows.
///
/// Construction validates shape and stochasticity: every (state, action) row
/// must have non-negative probabilities summing to 1 within 1e-12 (rows inside
/// the tolerance are renormalized exactly once; rows outside it are rejected).
class FiniteMdp {
public:
    FiniteMdp(int num_states, int num_actions, double discount,
              std::vector<std::vector<double>> rewards,
              std::vector<std::vector<std::vector<Transition>>> transitions)
        : num_states_(num_states), num_actions_(num_actions), discount_(discount),
          rewards_(std::move(rewards)), transitions_(std::move(transitions)) {
        if (num_states_ <= 0 || num_actions_ <= 0)
            throw std::invalid_argument("FiniteMdp: state and action counts must be positive");
        if (!(discount_ > 0.0) || !(discount_ < 1.0))
            throw std::invalid_argument("FiniteMdp: discount must lie in (0,1)");
        if (static_cast<int>(rewards_.size()) != num_states_ ||
            static_cast<int>(transitions_.size()) != num_states_)
            throw std::invalid_argument("FiniteMdp: outer table size must equal num_states");
        for (int s = 0; s < num_states_; ++s) {
            if (static_cast<int>(rewards_[s].size()) != num_actions_ ||
                static_cast<int>(transitions_[s].size()) != num_actions_)
                throw std::invalid_argument("FiniteMdp: per-state table size must equal num_actions");
            for (int a = 0; a < num_actions_; ++a) {
                if (!std::isfinite(rewards_[s][a]))
                    throw std::invalid_argument("FiniteMdp: rewards must be finite");
                validate_row(s, a);
            }
        }
    }

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }
    double discount() const { return discount_; }

    double reward(int s, int a) const { return rewards_[s][a]; }

    const std::vector<Transition>& transitions(int s, int a) const {
        return transitions_[s][a];
    }

    /// Q-value of action a in state s under continuation value v.
    double action_value(int s, int a, const ValueFunction& v) const {
        double expect = 0.0;
        for (const Transition& t : transitions_[s][a])
            expect += t.probability * v[t.next_state];
        return rewards_[s][a] + discount_ * expect;
    }

private:
    void validate_row(int s, int a) {
        auto& row = transitions_[s][a];
        if (row.empty())
            throw std::invalid_argument("FiniteMdp: transition row (" + std::to_string(s) +
                                        "," + std::to_string(a) + ") is empty");
        double sum = 0.0;
        for (const Transition& t : row) {
            if (t.next_state < 0 || t.next_state >= num_states_)
                throw std::invalid_argument("FiniteMdp: next_state out of range in row (" +
                                            std::to_string(s) + "," + std::to_string(a) + ")");
            if (!(t.probability >= 0.0) || !std::isfinite(t.probability))
                throw std::invalid_argument("FiniteMdp: probabilities must be non-negative in row (" +
                                            std::to_string(s) + "," + std::to_string(a) + ")");
            sum += t.probability;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("FiniteMdp: transition row (" + std::to_string(s) + "," +
                                        std::to_string(a) + ") sums to " + std::to_string(sum));
        if (sum != 1.0)
            for (Transition& t : row) t.probability /= sum;
    }

    int num_states_;
    int num_actions_;
    double discount_;
    std::vector<std::vector<double>> rewards_;
    std::vector<std::vector<std::vector<Transition>>> transitions_;
};

/// Sup-norm distance between two value functions of equal size.
inline double max_norm_distance(const ValueFunction& a, const ValueFunction& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("max_norm_distance: size mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

/// One application of the policy Bellman operator: (T_pi v)(s) = q(s, pi(s), v).
inline ValueFunction apply_bellman_op(const FiniteMdp& mdp, const StationaryPolicy& policy,
                                      const ValueFunction& v) {
    if (static_cast<int>(policy.size()) != mdp.num_states() ||
        static_cast<int>(v.size()) != mdp.num_states())
        throw std::invalid_argument("apply_bellman_op: size mismatch");
    ValueFunction out(v.size());
    for (int s = 0; s < mdp.num_states(); ++s) {
        int a = policy[s];
        if (a < 0 || a >= mdp.num_actions())
            throw std::invalid_argument("apply_bellman_op: action index out of range");
        out[s] = mdp.action_value(s, a, v);
    }
    return out;
}

/// Greedy policy with respect to v. Among actions whose Q-value is within
/// tie_tolerance * max(1, |best|) of the best, the lowest index wins; exact
/// ties therefore always resolve to the lowest-indexed action. The tolerance
/// absorbs rounding noise on comparisons that are exact ties in real
/// arithmetic; it is far below any genuine action gap in the instances here.
inline StationaryPolicy greedy_policy(const FiniteMdp& mdp, const ValueFunction& v,
                                      double tie_tolerance = 1e-12) {
    if (static_cast<int>(v.size()) != mdp.num_states())
        throw std::invalid_argument("greedy_policy: size mismatch");
    StationaryPolicy policy(mdp.num_states(), 0);
    std::vector<double> q(mdp.num_actions());
    for (int s = 0; s < mdp.num_states(); ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < mdp.num_actions(); ++a) {
            q[a] = mdp.action_value(s, a, v);
            best = std::max(best, q[a]);
        }
        const double slack = tie_tolerance * std::max(1.0, std::abs(best));
        for (int a = 0; a < mdp.num_actions(); ++a) {
            if (q[a] >= best - slack) {
                policy[s] = a;
                break;
            }
        }
    }
    return policy;
}

}  // namespace nsmpi
