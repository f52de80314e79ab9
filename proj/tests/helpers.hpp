#pragma once

#include <string>
#include <vector>

#include "qbound/mdp.hpp"

namespace testutil {

inline std::string fixture(const std::string& name) {
    return std::string(FIXTURE_DIR) + "/" + name;
}

// Single state with n self-loop actions, each paying `reward`.
inline qbound::TabularMdp self_loop(double reward, double gamma, int n_actions = 2) {
    qbound::TabularMdp m = qbound::TabularMdp::empty(1, n_actions, gamma);
    for (int a = 0; a < n_actions; ++a) {
        m.p(0, a, 0) = 1.0;
        m.r(0, a) = reward;
    }
    m.initial_dist = {1.0};
    m.validate();
    return m;
}

// Two states, one action: s0 pays 0 and moves to s1; s1 is terminal and pays 1.
inline qbound::TabularMdp two_state_chain(double gamma) {
    qbound::TabularMdp m = qbound::TabularMdp::empty(2, 1, gamma);
    m.p(0, 0, 1) = 1.0;
    m.r(0, 0) = 0.0;
    m.p(1, 0, 1) = 1.0;
    m.r(1, 0) = 1.0;
    m.terminal[1] = 1;
    m.initial_dist = {1.0, 0.0};
    m.validate();
    return m;
}

inline double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double x = a[i] - b[i];
        if (x < 0) x = -x;
        if (x > d) d = x;
    }
    return d;
}

} // namespace testutil
