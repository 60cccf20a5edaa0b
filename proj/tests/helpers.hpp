#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "nsmpi/nsmpi.hpp"

namespace testutil {

inline nsmpi::ValueFunction random_value(int n, std::uint64_t seed, double lo = -1.0,
                                         double hi = 1.0) {
    std::uint64_t state = nsmpi::detail::mix_seed(seed, 0x76616cULL);
    nsmpi::ValueFunction v(n);
    for (int s = 0; s < n; ++s) v[s] = lo + (hi - lo) * nsmpi::detail::uniform01(state);
    return v;
}

inline Eigen::MatrixXd dense_kernel(const nsmpi::FiniteMdp& mdp,
                                    const nsmpi::StationaryPolicy& policy) {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(mdp.num_states(), mdp.num_states());
    for (int s = 0; s < mdp.num_states(); ++s)
        for (const nsmpi::Transition& t : mdp.transitions(s, policy[s]))
            p(s, t.next_state) += t.probability;
    return p;
}

inline Eigen::VectorXd dense_reward(const nsmpi::FiniteMdp& mdp,
                                    const nsmpi::StationaryPolicy& policy) {
    Eigen::VectorXd r(mdp.num_states());
    for (int s = 0; s < mdp.num_states(); ++s) r(s) = mdp.reward(s, policy[s]);
    return r;
}

inline Eigen::VectorXd to_eigen(const nsmpi::ValueFunction& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace testutil
