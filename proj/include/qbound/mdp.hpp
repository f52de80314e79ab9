#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qbound {

/// Which Bellman operator a quantity refers to.
enum class Regime { Standard, EntropyRegularized };

/// Finite MDP with dense row-major tables.
///
/// Storage layout:
///   transition[(s * n_actions + a) * n_states + s2] = P(s2 | s, a)
///   reward[s * n_actions + a]                       = r(s, a)
///
/// Terminal states carry zero continuation: backups at a terminal state
/// return the immediate reward only, whatever the stored transition row says.
/// Transitions *into* a terminal state still use that state's value, so a
/// terminal state's fixed-point Q row equals its reward row.
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> transition;
    std::vector<double> reward;
    double gamma = 0.99;
    std::vector<std::uint8_t> terminal;
    std::vector<double> initial_dist;

    double p(int s, int a, int s2) const {
        return transition[static_cast<std::size_t>((s * n_actions + a)) * n_states + s2];
    }
    double& p(int s, int a, int s2) {
        return transition[static_cast<std::size_t>((s * n_actions + a)) * n_states + s2];
    }
    double r(int s, int a) const { return reward[static_cast<std::size_t>(s) * n_actions + a]; }
    double& r(int s, int a) { return reward[static_cast<std::size_t>(s) * n_actions + a]; }

    std::span<const double> transition_row(int s, int a) const {
        return {transition.data() + static_cast<std::size_t>((s * n_actions + a)) * n_states,
                static_cast<std::size_t>(n_states)};
    }

    /// True when every transition row is a point mass (within 1e-12).
    bool deterministic_dynamics() const;

    static TabularMdp empty(int n_states, int n_actions, double gamma);

    /// Throws std::invalid_argument on any structural violation: row sums off
    /// by more than 1e-12, negative probabilities, gamma outside (0,1),
    /// non-finite rewards, initial distribution not summing to 1.
    void validate() const;
};

/// Dense |S| x |A| table of action values.
struct QTable {
    enum class Kind { Iterate, OptimalStandard, OptimalSoft, PolicyValue };

    int n_states = 0;
    int n_actions = 0;
    std::vector<double> values;
    Kind kind = Kind::Iterate;

    static QTable zeros(int n_states, int n_actions) {
        QTable q;
        q.n_states = n_states;
        q.n_actions = n_actions;
        q.values.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
        return q;
    }
    static QTable constant(int n_states, int n_actions, double v) {
        QTable q = zeros(n_states, n_actions);
        for (double& x : q.values) x = v;
        return q;
    }

    double at(int s, int a) const { return values[static_cast<std::size_t>(s) * n_actions + a]; }
    double& at(int s, int a) { return values[static_cast<std::size_t>(s) * n_actions + a]; }
    std::span<const double> row(int s) const {
        return {values.data() + static_cast<std::size_t>(s) * n_actions,
                static_cast<std::size_t>(n_actions)};
    }

    bool same_shape(const QTable& o) const {
        return n_states == o.n_states && n_actions == o.n_actions;
    }
};

/// Sup-norm distance between two tables of identical shape.
double sup_distance(const QTable& a, const QTable& b);

/// Largest absolute entry.
double sup_norm(const QTable& q);

enum class PolicyKind { Greedy, Boltzmann };

/// Row-stochastic policy table, same layout as QTable.
struct Policy {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> probs;
    PolicyKind kind = PolicyKind::Greedy;

    double at(int s, int a) const { return probs[static_cast<std::size_t>(s) * n_actions + a]; }
    double& at(int s, int a) { return probs[static_cast<std::size_t>(s) * n_actions + a]; }
    std::span<const double> row(int s) const {
        return {probs.data() + static_cast<std::size_t>(s) * n_actions,
                static_cast<std::size_t>(n_actions)};
    }

    static Policy uniform(int n_states, int n_actions);

    /// Rows must sum to 1 within 1e-12 with non-negative entries.
    void validate() const;
};

/// Entropy-regularized setting: inverse temperature and prior policy.
/// A zero prior entry forbids that action (its KL cost is infinite); policy
/// evaluation refuses policies that put mass there.
struct SoftConfig {
    double beta = 1.0;
    Policy prior;

    static SoftConfig uniform(double beta, int n_states, int n_actions) {
        return SoftConfig{beta, Policy::uniform(n_states, n_actions)};
    }

    void validate(int n_states, int n_actions) const;
};

/// Result of an iterative solve: the fixed-point table, the number of
/// backups performed, and the sup-norm of the last successive difference.
struct Solution {
    QTable q;
    long iterations = 0;
    double residual = 0.0;
};

} // namespace qbound
