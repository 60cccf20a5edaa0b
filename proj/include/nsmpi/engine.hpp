#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nsmpi/bounds.hpp"
#include "nsmpi/evaluate.hpp"
#include "nsmpi/mdp.hpp"

namespace nsmpi {

/// Number of cycle-operator applications per iteration: a finite count m >= 0
/// or infinite, which means exact evaluation of the current periodic policy.
class MParameter {
public:
    static MParameter finite(int m) {
        if (m < 0) throw std::invalid_argument("MParameter: m must be non-negative");
        return MParameter(m, false);
    }
    static MParameter infinite() { return MParameter(0, true); }

    bool is_infinite() const { return infinite_; }

    int count() const {
        if (infinite_) throw std::logic_error("MParameter: infinite has no count");
        return m_;
    }

    bool operator==(const MParameter& o) const = default;

private:
    MParameter(int m, bool inf) : m_(m), infinite_(inf) {}

    int m_;
    bool infinite_;
};

/// Produces the error vector added to the value update of iteration k
/// (1-based); must return a finite vector of length num_states.
using ErrorModel = std::function<ValueFunction(int k, int num_states)>;

struct NsmpiConfig {
    MParameter m = MParameter::finite(0);
    int ell = 1;
    int iterations = 1;
    ValueFunction v0;
    /// Policies preceding the first improvement, newest-first (entry 0 acts
    /// right before iteration 1). Must hold exactly ell-1 policies or be
    /// empty, in which case greedy(v0) is repeated and the affected records
    /// carry initial_policy_defaulted = true.
    std::vector<StationaryPolicy> initial_policies;
    /// Null means exact updates (zero error).
    ErrorModel error_model;
    double eval_tolerance = 1e-12;
    int eval_max_iters = 100000;
    bool with_diagnostics = false;
};

struct IterationRecord {
    int k = 0;
    /// v_k, including the injected error.
    ValueFunction value;
    /// Improved policy pi_k of this iteration.
    StationaryPolicy policy;
    /// Output periodic policy pi_{k,l}, newest-first.
    PeriodicPolicy periodic;
    /// Exact value of the periodic policy at phase 0.
    ValueFunction periodic_value;
    /// max over states of v_star(s) - periodic_value(s); NaN when no optimal
    /// value was supplied.
    double loss_sup = std::numeric_limits<double>::quiet_NaN();
    /// True while the cycle still contains defaulted initial policies.
    bool initial_policy_defaulted = false;
    std::optional<Diagnostics> diagnostics;
};

namespace detail {

inline void validate_policy(const FiniteMdp& mdp, const StationaryPolicy& pi, const char* who) {
    if (static_cast<int>(pi.size()) != mdp.num_states())
        throw std::invalid_argument(std::string(who) + ": policy size mismatch");
    for (int a : pi)
        if (a < 0 || a >= mdp.num_actions())
            throw std::invalid_argument(std::string(who) + ": action index out of range");
}

inline void validate_vector(const FiniteMdp& mdp, const ValueFunction& v, const char* who) {
    if (static_cast<int>(v.size()) != mdp.num_states())
        throw std::invalid_argument(std::string(who) + ": vector size mismatch");
    for (double x : v)
        if (!std::isfinite(x))
            throw std::invalid_argument(std::string(who) + ": vector entries must be finite");
}

inline double signed_sup_loss(const ValueFunction& v_star, const ValueFunction& v) {
    double loss = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < v_star.size(); ++s)
        loss = std::max(loss, v_star[s] - v[s]);
    return loss;
}

}  // namespace detail

/// Runs K iterations of NSMPI(m, l): improve pi_k = greedy(v_{k-1}), update
/// v_k = (T_{pi_k,l})^m T_{pi_k} v_{k-1} + eps_k, and record the periodic
/// policy pi_{k,l} with its exact value. Supplying v_star fills loss_sup and,
/// with config.with_diagnostics, the per-iteration diagnostic vectors.
inline std::vector<IterationRecord> nsmpi_run(const FiniteMdp& mdp, const NsmpiConfig& config,
                                              const ValueFunction* v_star = nullptr) {
    const int n = mdp.num_states();
    if (config.ell < 1) throw std::invalid_argument("nsmpi_run: ell must be at least 1");
    if (config.iterations < 1) throw std::invalid_argument("nsmpi_run: iterations must be at least 1");
    if (!(config.eval_tolerance > 0.0))
        throw std::invalid_argument("nsmpi_run: eval_tolerance must be positive");
    detail::validate_vector(mdp, config.v0, "nsmpi_run v0");
    if (v_star) detail::validate_vector(mdp, *v_star, "nsmpi_run v_star");
    if (config.with_diagnostics && !v_star)
        throw std::invalid_argument("nsmpi_run: diagnostics require v_star");

    // Policies preceding pi_k, newest-first; always ell-1 entries.
    std::vector<StationaryPolicy> prev;
    bool defaulted = false;
    if (config.initial_policies.empty()) {
        if (config.ell > 1) {
            prev.assign(config.ell - 1, greedy_policy(mdp, config.v0));
            defaulted = true;
        }
    } else if (static_cast<int>(config.initial_policies.size()) == config.ell - 1) {
        for (const StationaryPolicy& pi : config.initial_policies)
            detail::validate_policy(mdp, pi, "nsmpi_run initial policy");
        prev = config.initial_policies;
    } else {
        throw std::invalid_argument("nsmpi_run: initial_policies must hold ell-1 policies");
    }

    std::vector<IterationRecord> records;
    records.reserve(config.iterations);
    ValueFunction v = config.v0;
    ValueFunction prev_eps;

    for (int k = 1; k <= config.iterations; ++k) {
        StationaryPolicy pi = greedy_policy(mdp, v);
        std::vector<StationaryPolicy> cycle;
        cycle.reserve(config.ell);
        cycle.push_back(pi);
        cycle.insert(cycle.end(), prev.begin(), prev.end());

        // Diagnostics of record k-1 need pi_k and its cycle.
        if (config.with_diagnostics && !records.empty()) {
            IterationRecord& last = records.back();
            last.diagnostics = compute_diagnostics(mdp, last.value, pi, cycle,
                                                   last.periodic_value, prev_eps, *v_star);
        }

        ValueFunction periodic_value = evaluate_periodic(
            mdp, PeriodicPolicy{cycle}, config.eval_tolerance, config.eval_max_iters);

        ValueFunction u;
        if (config.m.is_infinite()) {
            u = periodic_value;
        } else {
            u = apply_bellman_op(mdp, pi, v);
            for (int j = 0; j < config.m.count(); ++j) u = apply_cycle(mdp, cycle, u);
        }

        ValueFunction eps(n, 0.0);
        if (config.error_model) {
            eps = config.error_model(k, n);
            detail::validate_vector(mdp, eps, "nsmpi_run error model output");
        }
        for (int s = 0; s < n; ++s) u[s] += eps[s];
        v = std::move(u);

        IterationRecord rec;
        rec.k = k;
        rec.value = v;
        rec.policy = std::move(pi);
        rec.periodic = PeriodicPolicy{cycle};
        rec.periodic_value = std::move(periodic_value);
        if (v_star) rec.loss_sup = detail::signed_sup_loss(*v_star, rec.periodic_value);
        rec.initial_policy_defaulted = defaulted && k <= config.ell - 1;
        records.push_back(std::move(rec));

        if (config.ell > 1) {
            prev.insert(prev.begin(), records.back().policy);
            prev.resize(config.ell - 1);
        }
        prev_eps = std::move(eps);
    }

    // The last record needs one extra improvement step for its diagnostics.
    if (config.with_diagnostics) {
        IterationRecord& last = records.back();
        StationaryPolicy pi = greedy_policy(mdp, v);
        std::vector<StationaryPolicy> cycle;
        cycle.reserve(config.ell);
        cycle.push_back(pi);
        cycle.insert(cycle.end(), prev.begin(), prev.end());
        last.diagnostics = compute_diagnostics(mdp, last.value, pi, cycle, last.periodic_value,
                                               prev_eps, *v_star);
    }
    return records;
}

/// Exact value iteration; returns v_0..v_K.
inline std::vector<ValueFunction> reference_vi(const FiniteMdp& mdp, const ValueFunction& v0,
                                               int iterations) {
    detail::validate_vector(mdp, v0, "reference_vi v0");
    if (iterations < 0) throw std::invalid_argument("reference_vi: iterations must be non-negative");
    std::vector<ValueFunction> out;
    out.reserve(iterations + 1);
    out.push_back(v0);
    for (int k = 1; k <= iterations; ++k) {
        const ValueFunction& v = out.back();
        ValueFunction next(mdp.num_states());
        for (int s = 0; s < mdp.num_states(); ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < mdp.num_actions(); ++a)
                best = std::max(best, mdp.action_value(s, a, v));
            next[s] = best;
        }
        out.push_back(std::move(next));
    }
    return out;
}

struct PiResult {
    StationaryPolicy policy;
    ValueFunction value;
    /// Improved policies in order, excluding the start policy.
    std::vector<StationaryPolicy> visited;
    int iterations = 0;
};

/// Exact policy iteration from start policy pi0; stops when the improvement
/// step returns the current policy.
inline PiResult reference_pi(const FiniteMdp& mdp, const StationaryPolicy& pi0,
                             int max_iters = 1000, double eval_tolerance = 1e-12) {
    detail::validate_policy(mdp, pi0, "reference_pi pi0");
    PiResult result;
    result.policy = pi0;
    result.value = evaluate_stationary(mdp, result.policy, eval_tolerance);
    for (int t = 0; t < max_iters; ++t) {
        StationaryPolicy improved = greedy_policy(mdp, result.value);
        if (improved == result.policy) return result;
        result.policy = std::move(improved);
        result.value = evaluate_stationary(mdp, result.policy, eval_tolerance);
        result.visited.push_back(result.policy);
        ++result.iterations;
    }
    throw ConvergenceError("reference_pi: no stable policy within max_iters",
                           std::numeric_limits<double>::quiet_NaN());
}

struct BoundCheckRow {
    int k = 0;
    double loss = 0.0;
    double bound = 0.0;
    double slack = 0.0;
    double ratio = 0.0;
};

/// Compares each record's loss_sup against theorem2_bound at its iteration
/// index. base supplies gamma, ell, epsilon and initial_gap; base.k is
/// ignored. ratio is loss/bound, defined as 1 when both are below 1e-15.
inline std::vector<BoundCheckRow> check_bound_satisfaction(
    const std::vector<IterationRecord>& records, BoundInputs base) {
    std::vector<BoundCheckRow> rows;
    rows.reserve(records.size());
    for (const IterationRecord& rec : records) {
        if (!std::isfinite(rec.loss_sup))
            throw std::invalid_argument("check_bound_satisfaction: records lack loss_sup");
        BoundCheckRow row;
        row.k = rec.k;
        row.loss = rec.loss_sup;
        base.k = rec.k;
        row.bound = theorem2_bound(base);
        row.slack = row.bound - row.loss;
        if (row.bound != 0.0)
            row.ratio = row.loss / row.bound;
        else
            row.ratio = (std::abs(row.loss) < 1e-15) ? 1.0 : std::numeric_limits<double>::infinity();
        rows.push_back(row);
    }
    return rows;
}

}  // namespace nsmpi
