#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "nsmpi/bounds.hpp"
#include "nsmpi/engine.hpp"
#include "nsmpi/mdp.hpp"

namespace nsmpi {

/// Worst-case chain instance on which the loss of the periodic output policy
/// meets its bound with equality at every iteration.
///
/// Chain positions are 1..N in the usual presentation; state index s (0-based)
/// is chain position s+1. Action 0 advances from position i to i+ell-1 with
/// reward r_i = -2 eps (gamma - gamma^i)/(1 - gamma); action 1 retreats to
/// i-1 with reward 0. Position 1 is absorbing with reward 0, and advance
/// targets past N self-loop.
struct TightInstanceSpec {
    int ell = 1;
    /// Finite cycle-operator application count; the closed forms below are
    /// defined for finite m only.
    int m = 0;
    double epsilon = 0.1;
    double gamma = 0.9;
    /// Number of improvement iterations K the instance must support.
    int max_iterations = 8;
    /// 0 selects the minimum valid size.
    int num_states = 0;
};

/// Smallest chain length that keeps all K iterations away from the boundary.
inline int tight_min_num_states(int ell, int m, int max_iterations) {
    if (ell < 1 || m < 0 || max_iterations < 1)
        throw std::invalid_argument("tight_min_num_states: invalid parameters");
    return max_iterations + (max_iterations * m + 1) * ell + 2;
}

inline int tight_resolved_num_states(const TightInstanceSpec& spec) {
    const int min_n = tight_min_num_states(spec.ell, spec.m, spec.max_iterations);
    if (spec.num_states == 0) return min_n;
    if (spec.num_states < min_n)
        throw std::invalid_argument("TightInstanceSpec: num_states below minimum for K iterations");
    return spec.num_states;
}

/// Advance reward at chain position i (1-based): -2 eps (gamma - gamma^i)/(1-gamma).
inline double tight_advance_reward(int i, double gamma, double epsilon) {
    return -2.0 * epsilon * (gamma - std::pow(gamma, i)) / (1.0 - gamma);
}

inline FiniteMdp build_tight_mdp(const TightInstanceSpec& spec) {
    if (!(spec.gamma > 0.0) || !(spec.gamma < 1.0))
        throw std::invalid_argument("build_tight_mdp: gamma must lie in (0,1)");
    if (!(spec.epsilon >= 0.0))
        throw std::invalid_argument("build_tight_mdp: epsilon must be non-negative");
    const int n = tight_resolved_num_states(spec);
    std::vector<std::vector<double>> rewards(n, std::vector<double>(2, 0.0));
    std::vector<std::vector<std::vector<Transition>>> transitions(
        n, std::vector<std::vector<Transition>>(2));
    transitions[0][0] = {{0, 1.0}};
    transitions[0][1] = {{0, 1.0}};
    for (int s = 1; s < n; ++s) {
        const int advance = s + spec.ell - 1;
        transitions[s][0] = {{advance < n ? advance : s, 1.0}};
        transitions[s][1] = {{s - 1, 1.0}};
        rewards[s][0] = tight_advance_reward(s + 1, spec.gamma, spec.epsilon);
    }
    return FiniteMdp(n, 2, spec.gamma, std::move(rewards), std::move(transitions));
}

/// Error vector of iteration k: -eps at chain position k, +eps at k+ell.
inline ValueFunction tight_error_schedule(int k, const TightInstanceSpec& spec) {
    const int n = tight_resolved_num_states(spec);
    if (k < 1 || k + spec.ell > n)
        throw std::out_of_range("tight_error_schedule: iteration index outside the chain");
    ValueFunction eps(n, 0.0);
    eps[k - 1] = -spec.epsilon;
    eps[k + spec.ell - 1] = spec.epsilon;
    return eps;
}

inline ErrorModel tight_error_model(const TightInstanceSpec& spec) {
    const int n = tight_resolved_num_states(spec);
    return [spec, n](int k, int num_states) {
        if (num_states != n)
            throw std::invalid_argument("tight_error_model: state count mismatch");
        return tight_error_schedule(k, spec);
    };
}

/// Improved policy of iteration k: advance exactly at chain position k,
/// retreat elsewhere. Position 1 is absorbing and its greedy tie resolves to
/// action 0.
inline int tight_policy_closed_form(int k, int state) {
    if (k < 1 || state < 0)
        throw std::invalid_argument("tight_policy_closed_form: invalid indices");
    if (state == 0) return 0;
    return state + 1 == k ? 0 : 1;
}

/// Closed-form v_k at 0-based state index; defined for 1 <= k <= max_iterations.
///
/// Writing i = state+1, d = i-k, unit = ell*m+1 and
/// S(x) = sum_{j=x..m} gamma^(ell j), the trajectory is piecewise:
///   i beyond the frontier k + ((k-1)m+1) ell        -> 0
///   i < k                                            -> -gamma^((k-1) unit) eps
///   i = k                                            -> v_k(k+ell) + r_k - 2 eps
///   d = n ell (a loop target), q = (n-1) div m,
///     p = (n-1) mod m (q = p = 0 when m = 0)         ->
///       gamma^(q unit) [ S(p+1) r_{k-q} + [p=0] eps
///         + sum_{j=1..k-q-1} gamma^(j unit) (S(1) r_{k-q-j} + eps) ]
///   otherwise with q = d div ell: q = (k-1)m         -> 0
///   otherwise                                        -> -gamma^((k-1) unit) eps
inline double tight_value_closed_form(int k, int state, const TightInstanceSpec& spec) {
    const int n = tight_resolved_num_states(spec);
    if (k < 1 || k > spec.max_iterations)
        throw std::out_of_range("tight_value_closed_form: k outside 1..max_iterations");
    if (state < 0 || state >= n)
        throw std::out_of_range("tight_value_closed_form: state outside the chain");
    const double g = spec.gamma;
    const double eps = spec.epsilon;
    const int ell = spec.ell;
    const int m = spec.m;
    const long long unit = static_cast<long long>(ell) * m + 1;
    const auto S = [&](long long x) -> double {
        if (x > m) return 0.0;
        return (std::pow(g, static_cast<double>(ell) * x) -
                std::pow(g, static_cast<double>(ell) * (m + 1))) /
               (1.0 - std::pow(g, ell));
    };

    const int i = state + 1;
    const long long frontier =
        k + (static_cast<long long>(k - 1) * m + 1) * ell;
    if (i > frontier) return 0.0;
    if (i < k) return -std::pow(g, static_cast<double>((k - 1) * unit)) * eps;
    if (i == k)
        return tight_value_closed_form(k, k + ell - 1, spec) +
               tight_advance_reward(k, g, eps) - 2.0 * eps;

    const int d = i - k;
    if (d % ell == 0) {
        const int steps = d / ell;
        const long long q = (m == 0) ? 0 : (steps - 1) / m;
        const long long p = (m == 0) ? 0 : (steps - 1) % m;
        double acc = S(p + 1) * tight_advance_reward(k - static_cast<int>(q), g, eps) +
                     (p == 0 ? eps : 0.0);
        for (long long j = 1; j <= k - q - 1; ++j)
            acc += std::pow(g, static_cast<double>(j * unit)) *
                   (S(1) * tight_advance_reward(k - static_cast<int>(q + j), g, eps) + eps);
        return std::pow(g, static_cast<double>(q * unit)) * acc;
    }
    const long long q = d / ell;
    if (q == static_cast<long long>(k - 1) * m) return 0.0;
    return -std::pow(g, static_cast<double>((k - 1) * unit)) * eps;
}

struct VerificationRow {
    int k = 0;
    double max_value_dev = 0.0;
    bool policy_match = true;
    double loss = 0.0;
    double bound = 0.0;
    double ratio = 0.0;
};

struct VerificationReport {
    std::vector<VerificationRow> rows;
    double max_value_dev = 0.0;
    bool values_match = true;
    bool policies_match = true;
    /// Largest |loss - bound| across iterations.
    double max_equality_gap = 0.0;

    bool success() const { return values_match && policies_match; }
    bool equality_within(double tol) const { return max_equality_gap <= tol; }
};

/// Runs NSMPI on the tight instance under the adversarial error schedule and
/// compares every iteration against the closed forms. Values must agree
/// within 1e-9 and policies exactly for the report to flag success.
///
/// Degenerate case: with a zero error level every reward is zero, so every
/// action is greedy at every state and the characterized policy is only one
/// of many valid selections. The policy comparison is skipped as vacuous;
/// value and loss checks stay active.
inline VerificationReport verify_tight_trajectory(const TightInstanceSpec& spec) {
    const int n = tight_resolved_num_states(spec);
    const FiniteMdp mdp = build_tight_mdp(spec);

    StationaryPolicy retreat(n, 1);
    retreat[0] = 0;

    NsmpiConfig config;
    config.m = MParameter::finite(spec.m);
    config.ell = spec.ell;
    config.iterations = spec.max_iterations;
    config.v0.assign(n, 0.0);
    config.initial_policies.assign(spec.ell > 1 ? spec.ell - 1 : 0, retreat);
    config.error_model = tight_error_model(spec);

    const ValueFunction v_star(n, 0.0);
    const std::vector<IterationRecord> records = nsmpi_run(mdp, config, &v_star);

    VerificationReport report;
    BoundInputs inputs;
    inputs.gamma = spec.gamma;
    inputs.ell = spec.ell;
    inputs.epsilon = spec.epsilon;
    inputs.initial_gap = 0.0;
    for (const IterationRecord& rec : records) {
        VerificationRow row;
        row.k = rec.k;
        for (int s = 0; s < n; ++s) {
            row.max_value_dev = std::max(
                row.max_value_dev, std::abs(rec.value[s] - tight_value_closed_form(rec.k, s, spec)));
            if (spec.epsilon > 0.0 && rec.policy[s] != tight_policy_closed_form(rec.k, s))
                row.policy_match = false;
        }
        row.loss = rec.loss_sup;
        inputs.k = rec.k;
        row.bound = theorem2_bound(inputs);
        row.ratio = row.bound != 0.0 ? row.loss / row.bound
                                     : (std::abs(row.loss) < 1e-15 ? 1.0 : std::numeric_limits<double>::infinity());
        report.max_value_dev = std::max(report.max_value_dev, row.max_value_dev);
        report.policies_match = report.policies_match && row.policy_match;
        report.max_equality_gap = std::max(report.max_equality_gap, std::abs(row.loss - row.bound));
        report.rows.push_back(row);
    }
    report.values_match = report.max_value_dev <= 1e-9;
    return report;
}

}  // namespace nsmpi
