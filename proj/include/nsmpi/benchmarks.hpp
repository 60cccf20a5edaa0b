#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "nsmpi/engine.hpp"
#include "nsmpi/mdp.hpp"

namespace nsmpi {
namespace detail {

/// splitmix64 step; the draw sequence is fully determined by the start state,
/// independent of platform or standard-library internals.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic combination of two seeds into a fresh stream state.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a;
    s = splitmix64_next(s) ^ b;
    return splitmix64_next(s);
}

/// Uniform double in [0, 1) from one splitmix64 draw.
inline double uniform01(std::uint64_t& state) {
    return static_cast<double>(splitmix64_next(state) >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Repair-shop location problem over n sites. The state is the pair (repair
/// location s_r, trailer location s_t), indexed (s_r-1)*n + (s_t-1); the
/// action is the next trailer site a in 1..n. One step costs the distance to
/// the trailer plus half the trailer move: r = -|s_r - s_t| - |s_t - a|/2.
/// From s_r < n the repair location moves uniformly over {s_r..n}; from
/// s_r = n it returns to site 1 with probability 0.75 and stays otherwise.
struct DynamicLocationSpec {
    int n = 8;
    double gamma = 0.98;
};

inline FiniteMdp dynamic_location_mdp(const DynamicLocationSpec& spec) {
    if (spec.n < 2) throw std::invalid_argument("dynamic_location_mdp: need at least 2 sites");
    const int n = spec.n;
    const int num_states = n * n;
    std::vector<std::vector<double>> rewards(num_states, std::vector<double>(n, 0.0));
    std::vector<std::vector<std::vector<Transition>>> transitions(
        num_states, std::vector<std::vector<Transition>>(n));
    for (int sr = 1; sr <= n; ++sr) {
        for (int st = 1; st <= n; ++st) {
            const int s = (sr - 1) * n + (st - 1);
            for (int a = 1; a <= n; ++a) {
                rewards[s][a - 1] = -std::abs(sr - st) - std::abs(st - a) / 2.0;
                auto& row = transitions[s][a - 1];
                if (sr < n) {
                    const double p = 1.0 / (n - sr + 1);
                    for (int sr2 = sr; sr2 <= n; ++sr2)
                        row.push_back({(sr2 - 1) * n + (a - 1), p});
                } else {
                    row.push_back({a - 1, 0.75});
                    row.push_back({(n - 1) * n + (a - 1), 0.25});
                }
            }
        }
    }
    return FiniteMdp(num_states, n, spec.gamma, std::move(rewards), std::move(transitions));
}

/// Random MDP population for property tests: every (state, action) row has
/// `branching` distinct successors with probabilities drawn uniformly from
/// the simplex; rewards are uniform in [-1, 1], zeroed with probability
/// reward_sparsity. Construction is bit-for-bit reproducible from the seed.
struct GarnetSpec {
    int num_states = 10;
    int num_actions = 2;
    int branching = 3;
    double reward_sparsity = 0.0;
    double discount = 0.95;
    std::uint64_t seed = 0;
};

inline FiniteMdp garnet_mdp(const GarnetSpec& spec) {
    if (spec.num_states < 1 || spec.num_actions < 1)
        throw std::invalid_argument("garnet_mdp: state and action counts must be positive");
    if (spec.branching < 1 || spec.branching > spec.num_states)
        throw std::invalid_argument("garnet_mdp: branching must lie in 1..num_states");
    if (spec.reward_sparsity < 0.0 || spec.reward_sparsity > 1.0)
        throw std::invalid_argument("garnet_mdp: reward_sparsity must lie in [0,1]");

    const int n = spec.num_states;
    const int b = spec.branching;
    std::uint64_t state = detail::mix_seed(spec.seed, 0x6d6470ULL);
    std::vector<std::vector<double>> rewards(n, std::vector<double>(spec.num_actions, 0.0));
    std::vector<std::vector<std::vector<Transition>>> transitions(
        n, std::vector<std::vector<Transition>>(spec.num_actions));
    std::vector<int> pool(n);
    std::vector<double> cuts(b + 1);
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < spec.num_actions; ++a) {
            // Distinct successors via a partial shuffle of the state pool.
            std::iota(pool.begin(), pool.end(), 0);
            for (int i = 0; i < b; ++i) {
                const int j = i + static_cast<int>(detail::splitmix64_next(state) %
                                                   static_cast<std::uint64_t>(n - i));
                std::swap(pool[i], pool[j]);
            }
            // Uniform simplex point from sorted-uniform spacings.
            cuts[0] = 0.0;
            cuts[b] = 1.0;
            for (int i = 1; i < b; ++i) cuts[i] = detail::uniform01(state);
            std::sort(cuts.begin() + 1, cuts.begin() + b);
            auto& row = transitions[s][a];
            row.reserve(b);
            for (int i = 0; i < b; ++i) row.push_back({pool[i], cuts[i + 1] - cuts[i]});

            const double gate = detail::uniform01(state);
            const double value = 2.0 * detail::uniform01(state) - 1.0;
            rewards[s][a] = gate < spec.reward_sparsity ? 0.0 : value;
        }
    }
    return FiniteMdp(n, spec.num_actions, spec.discount, std::move(rewards),
                     std::move(transitions));
}

/// Per-iteration value noise: every state gets an independent uniform draw
/// from [0, epsilon]. Draws depend only on (seed, k), not on call order.
struct UniformErrorModel {
    double epsilon = 0.0;
    std::uint64_t seed = 0;
};

inline ValueFunction draw_error(const UniformErrorModel& model, int k, int num_states) {
    if (!(model.epsilon >= 0.0))
        throw std::invalid_argument("draw_error: epsilon must be non-negative");
    if (num_states < 1) throw std::invalid_argument("draw_error: num_states must be positive");
    std::uint64_t state = detail::mix_seed(model.seed, static_cast<std::uint64_t>(k));
    ValueFunction eps(num_states);
    for (int s = 0; s < num_states; ++s) eps[s] = model.epsilon * detail::uniform01(state);
    return eps;
}

inline ErrorModel make_error_model(const UniformErrorModel& model) {
    return [model](int k, int num_states) { return draw_error(model, k, num_states); };
}

/// Persistent variant: one uniform vector is drawn per seed and returned at
/// every iteration. Each component still has the [0, epsilon] marginal, but
/// the error no longer changes between iterations, so it accumulates through
/// the update operator instead of being averaged away. Fresh noise is
/// dominated by the most recent draw, which affects every (m, ell) setting
/// alike; a persistent error is damped by the factor the cycle contributes,
/// so it is the mode that separates cycle lengths in benchmark studies.
inline ErrorModel make_persistent_error_model(const UniformErrorModel& model) {
    return [model](int, int num_states) { return draw_error(model, 1, num_states); };
}

}  // namespace nsmpi
