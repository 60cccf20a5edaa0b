#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nsmpi/evaluate.hpp"
#include "nsmpi/mdp.hpp"

namespace nsmpi {

/// Inputs of the loss bounds: discount gamma, cycle length ell, iteration
/// index k (1-based), sup-norm error level epsilon per iteration, and the
/// sup-norm gap between the optimal value and the initial value function.
struct BoundInputs {
    double gamma = 0.9;
    int ell = 1;
    int k = 1;
    double epsilon = 0.0;
    double initial_gap = 0.0;
};

/// Loss bound for cycle length ell:
///   2 eps (gamma - gamma^k) / ((1-gamma)(1-gamma^ell)) + 2 gamma^k gap / (1-gamma).
inline double theorem2_bound(const BoundInputs& in) {
    if (!(in.gamma > 0.0) || !(in.gamma < 1.0))
        throw std::invalid_argument("theorem2_bound: gamma must lie in (0,1)");
    if (in.ell < 1 || in.k < 1)
        throw std::invalid_argument("theorem2_bound: ell and k must be at least 1");
    const double g = in.gamma;
    const double gk = std::pow(g, in.k);
    const double error_term =
        2.0 * in.epsilon * (g - gk) / ((1.0 - g) * (1.0 - std::pow(g, in.ell)));
    const double gap_term = 2.0 * gk * in.initial_gap / (1.0 - g);
    return error_term + gap_term;
}

/// Stationary-output loss bound; the ell = 1 case of theorem2_bound, so the
/// error term carries 1/(1-gamma)^2.
inline double theorem1_bound(BoundInputs in) {
    in.ell = 1;
    return theorem2_bound(in);
}

/// Cycle length ceil(1/(1-gamma)) and the horizon constant 2/(1-gamma^ell)
/// it yields, which stays below 3.164 for every gamma in (0,1).
inline std::pair<int, double> horizon_constant(double gamma) {
    if (!(gamma > 0.0) || !(gamma < 1.0))
        throw std::invalid_argument("horizon_constant: gamma must lie in (0,1)");
    const int ell = static_cast<int>(std::ceil(1.0 / (1.0 - gamma)));
    return {ell, 2.0 / (1.0 - std::pow(gamma, ell))};
}

/// Per-iteration decomposition of the loss. All vectors are over states.
///   residual   b_k = T_{pi_{k+1}} v_k - T_{pi_{k+1},l} T_{pi_{k+1}} v_k
///   shift      s_k = v_k - v_{pi_{k,l}} - eps_k
///   distance   d_k = v_star - v_k + eps_k
///   loss_vec   l_k = v_star - v_{pi_{k,l}}
/// and identically l_k = s_k + d_k.
struct Diagnostics {
    ValueFunction residual;
    ValueFunction shift;
    ValueFunction distance;
    ValueFunction loss_vec;
};

/// Computes the diagnostic vectors for iteration k. next_cycle is the cycle
/// of pi_{k+1,l} (newest-first, front = pi_{k+1}); current_value is the exact
/// value of pi_{k,l} at phase 0.
inline Diagnostics compute_diagnostics(const FiniteMdp& mdp, const ValueFunction& v_k,
                                       const StationaryPolicy& pi_next,
                                       const std::vector<StationaryPolicy>& next_cycle,
                                       const ValueFunction& current_value,
                                       const ValueFunction& eps_k, const ValueFunction& v_star) {
    const int n = mdp.num_states();
    if (static_cast<int>(v_k.size()) != n || static_cast<int>(eps_k.size()) != n ||
        static_cast<int>(v_star.size()) != n || static_cast<int>(current_value.size()) != n)
        throw std::invalid_argument("compute_diagnostics: size mismatch");
    if (next_cycle.empty() || next_cycle.front() != pi_next)
        throw std::invalid_argument("compute_diagnostics: next_cycle must start with pi_next");

    Diagnostics d;
    ValueFunction u = apply_bellman_op(mdp, pi_next, v_k);
    ValueFunction w = apply_cycle(mdp, next_cycle, u);
    d.residual.resize(n);
    d.shift.resize(n);
    d.distance.resize(n);
    d.loss_vec.resize(n);
    for (int s = 0; s < n; ++s) {
        d.residual[s] = u[s] - w[s];
        d.shift[s] = v_k[s] - current_value[s] - eps_k[s];
        d.distance[s] = v_star[s] - v_k[s] + eps_k[s];
        d.loss_vec[s] = v_star[s] - current_value[s];
    }
    return d;
}

}  // namespace nsmpi
