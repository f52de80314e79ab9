#include "qbound/mdp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qbound {

namespace {

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

} // namespace

bool TabularMdp::deterministic_dynamics() const {
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            for (int s2 = 0; s2 < n_states; ++s2) {
                double v = p(s, a, s2);
                if (v > 1e-12 && v < 1.0 - 1e-12) return false;
            }
        }
    return true;
}

TabularMdp TabularMdp::empty(int n_states, int n_actions, double gamma) {
    TabularMdp m;
    m.n_states = n_states;
    m.n_actions = n_actions;
    m.gamma = gamma;
    m.transition.assign(static_cast<std::size_t>(n_states) * n_actions * n_states, 0.0);
    m.reward.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
    m.terminal.assign(static_cast<std::size_t>(n_states), 0);
    m.initial_dist.assign(static_cast<std::size_t>(n_states), 0.0);
    return m;
}

void TabularMdp::validate() const {
    if (n_states <= 0 || n_actions <= 0)
        throw std::invalid_argument("TabularMdp: state and action counts must be positive");
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("TabularMdp: gamma must lie in (0,1)");
    const std::size_t nsa = static_cast<std::size_t>(n_states) * n_actions;
    if (transition.size() != nsa * n_states)
        throw std::invalid_argument("TabularMdp: transition tensor has wrong size");
    if (reward.size() != nsa) throw std::invalid_argument("TabularMdp: reward table has wrong size");
    if (terminal.size() != static_cast<std::size_t>(n_states))
        throw std::invalid_argument("TabularMdp: terminal mask has wrong size");
    if (initial_dist.size() != static_cast<std::size_t>(n_states))
        throw std::invalid_argument("TabularMdp: initial distribution has wrong size");
    if (!all_finite(reward)) throw std::invalid_argument("TabularMdp: non-finite reward");

    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            double sum = 0.0;
            for (int s2 = 0; s2 < n_states; ++s2) {
                double v = p(s, a, s2);
                if (!std::isfinite(v) || v < 0.0)
                    throw std::invalid_argument("TabularMdp: transition entry negative or non-finite at state " +
                                                std::to_string(s));
                sum += v;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw std::invalid_argument("TabularMdp: transition row (s=" + std::to_string(s) +
                                            ", a=" + std::to_string(a) + ") sums to " +
                                            std::to_string(sum));
        }
    }
    double mu = 0.0;
    for (double v : initial_dist) {
        if (!std::isfinite(v) || v < 0.0)
            throw std::invalid_argument("TabularMdp: initial distribution entry negative or non-finite");
        mu += v;
    }
    if (std::abs(mu - 1.0) > 1e-12)
        throw std::invalid_argument("TabularMdp: initial distribution sums to " + std::to_string(mu));
}

double sup_distance(const QTable& a, const QTable& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("sup_distance: shape mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        d = std::max(d, std::abs(a.values[i] - b.values[i]));
    return d;
}

double sup_norm(const QTable& q) {
    double d = 0.0;
    for (double v : q.values) d = std::max(d, std::abs(v));
    return d;
}

Policy Policy::uniform(int n_states, int n_actions) {
    Policy pi;
    pi.n_states = n_states;
    pi.n_actions = n_actions;
    pi.kind = PolicyKind::Boltzmann;
    pi.probs.assign(static_cast<std::size_t>(n_states) * n_actions, 1.0 / n_actions);
    return pi;
}

void Policy::validate() const {
    if (n_states <= 0 || n_actions <= 0)
        throw std::invalid_argument("Policy: state and action counts must be positive");
    if (probs.size() != static_cast<std::size_t>(n_states) * n_actions)
        throw std::invalid_argument("Policy: table has wrong size");
    for (int s = 0; s < n_states; ++s) {
        double sum = 0.0;
        for (int a = 0; a < n_actions; ++a) {
            double v = at(s, a);
            if (!std::isfinite(v) || v < 0.0)
                throw std::invalid_argument("Policy: negative or non-finite probability at state " +
                                            std::to_string(s));
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("Policy: row " + std::to_string(s) + " sums to " +
                                        std::to_string(sum));
    }
}

void SoftConfig::validate(int n_states, int n_actions) const {
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw std::invalid_argument("SoftConfig: beta must be positive and finite");
    prior.validate();
    if (prior.n_states != n_states || prior.n_actions != n_actions)
        throw std::invalid_argument("SoftConfig: prior shape does not match the MDP");
}

} // namespace qbound
