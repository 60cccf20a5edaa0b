#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nsmpi/mdp.hpp"

namespace nsmpi {

/// Raised when an evaluation routine cannot reach the requested residual.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
          residual_(residual) {}

    double residual() const { return residual_; }

private:
    double residual_;
};

/// State-count threshold below which evaluation uses a direct linear solve.
inline constexpr int kDirectSolveThreshold = 2000;

namespace detail {

/// Composite reward and kernel of one pass of the cycle (applied cycle[0]
/// first): T_cyc v = reward + kernel * v with kernel = gamma^l P_0 ... P_{l-1}.
struct ComposedOperator {
    Eigen::VectorXd reward;
    Eigen::MatrixXd kernel;
};

inline ComposedOperator compose_cycle(const FiniteMdp& mdp,
                                      const std::vector<StationaryPolicy>& cycle) {
    const int n = mdp.num_states();
    const double g = mdp.discount();
    ComposedOperator op;

    // Backward accumulation of the composite reward: w = r_i + g P_i w.
    op.reward = Eigen::VectorXd::Zero(n);
    for (auto it = cycle.rbegin(); it != cycle.rend(); ++it) {
        Eigen::VectorXd next(n);
        for (int s = 0; s < n; ++s) {
            double expect = 0.0;
            for (const Transition& t : mdp.transitions(s, (*it)[s]))
                expect += t.probability * op.reward[t.next_state];
            next[s] = mdp.reward(s, (*it)[s]) + g * expect;
        }
        op.reward = std::move(next);
    }

    // Forward product of the kernels: M = P_0 P_1 ... P_{l-1}, scaled by g^l.
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
    double scale = 1.0;
    for (const StationaryPolicy& pi : cycle) {
        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(n, n);
        for (int z = 0; z < n; ++z)
            for (const Transition& t : mdp.transitions(z, pi[z]))
                next.col(t.next_state) += t.probability * m.col(z);
        m = std::move(next);
        scale *= g;
    }
    op.kernel = scale * m;
    return op;
}

/// Solves (I - kernel) v = reward by LU with iterative refinement until the
/// sup-norm residual meets tolerance.
inline ValueFunction solve_composed(const ComposedOperator& op, double tolerance,
                                    const char* who) {
    const Eigen::Index n = op.reward.size();
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - op.kernel;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    Eigen::VectorXd v = lu.solve(op.reward);
    double residual = (op.reward - a * v).lpNorm<Eigen::Infinity>();
    for (int step = 0; step < 3 && residual > tolerance; ++step) {
        v += lu.solve(op.reward - a * v);
        residual = (op.reward - a * v).lpNorm<Eigen::Infinity>();
    }
    if (!(residual <= tolerance))
        throw ConvergenceError(std::string(who) + ": direct solve residual above tolerance",
                               residual);
    return ValueFunction(v.data(), v.data() + n);
}

}  // namespace detail

/// One pass of the cycle applied to v: T_{cycle[0]} T_{cycle[1]} ... v.
inline ValueFunction apply_cycle(const FiniteMdp& mdp,
                                 const std::vector<StationaryPolicy>& cycle,
                                 ValueFunction v) {
    for (auto it = cycle.rbegin(); it != cycle.rend(); ++it)
        v = apply_bellman_op(mdp, *it, v);
    return v;
}

/// Exact value of the periodic policy at phase 0 via a dense LU solve on the
/// composed operator. Intended for state counts up to a few thousand.
inline ValueFunction evaluate_periodic_direct(const FiniteMdp& mdp, const PeriodicPolicy& policy,
                                              double tolerance = 1e-12) {
    if (policy.cycle.empty())
        throw std::invalid_argument("evaluate_periodic_direct: empty cycle");
    return detail::solve_composed(detail::compose_cycle(mdp, policy.cycle), tolerance,
                                  "evaluate_periodic_direct");
}

/// Value of the periodic policy at phase 0 by fixed-point iteration of the
/// composed operator; stops when its sup-norm residual is at most tolerance.
inline ValueFunction evaluate_periodic_iterative(const FiniteMdp& mdp,
                                                 const PeriodicPolicy& policy,
                                                 double tolerance = 1e-12,
                                                 int max_iters = 100000) {
    if (policy.cycle.empty())
        throw std::invalid_argument("evaluate_periodic_iterative: empty cycle");
    ValueFunction v(mdp.num_states(), 0.0);
    double residual = std::numeric_limits<double>::infinity();
    for (int i = 0; i < max_iters; ++i) {
        ValueFunction next = apply_cycle(mdp, policy.cycle, v);
        residual = max_norm_distance(next, v);
        v = std::move(next);
        if (residual <= tolerance) return v;
    }
    throw ConvergenceError("evaluate_periodic_iterative: exceeded max_iters", residual);
}

/// Exact value of the periodic policy at phase 0. Dispatches to the direct
/// solve for small state spaces and to fixed-point iteration otherwise.
inline ValueFunction evaluate_periodic(const FiniteMdp& mdp, const PeriodicPolicy& policy,
                                       double tolerance = 1e-12, int max_iters = 100000,
                                       int direct_threshold = kDirectSolveThreshold) {
    if (mdp.num_states() <= direct_threshold)
        return evaluate_periodic_direct(mdp, policy, tolerance);
    return evaluate_periodic_iterative(mdp, policy, tolerance, max_iters);
}

/// Exact value of a stationary policy (the period-1 case).
inline ValueFunction evaluate_stationary(const FiniteMdp& mdp, const StationaryPolicy& policy,
                                         double tolerance = 1e-12, int max_iters = 100000,
                                         int direct_threshold = kDirectSolveThreshold) {
    if (static_cast<int>(policy.size()) != mdp.num_states())
        throw std::invalid_argument("evaluate_stationary: size mismatch");
    return evaluate_periodic(mdp, PeriodicPolicy{{policy}}, tolerance, max_iters,
                             direct_threshold);
}

}  // namespace nsmpi
