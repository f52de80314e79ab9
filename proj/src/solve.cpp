#include "qbound/solve.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace qbound {

namespace {

double max_of_row(std::span<const double> row) {
    double m = row[0];
    for (double v : row) m = std::max(m, v);
    return m;
}

// Nonzero transition entries per (s,a), next-state index ascending. Grid rows
// carry at most a handful of successors, so iterating nonzeros instead of the
// dense row is the difference between seconds and hours on the sweeps. Sums
// skip only exact zeros, so results match the dense backups bit for bit.
struct SparseRows {
    std::vector<int> next;
    std::vector<double> prob;
    std::vector<std::size_t> offset; // n_states*n_actions + 1 entries

    explicit SparseRows(const TabularMdp& mdp) {
        offset.reserve(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions + 1);
        offset.push_back(0);
        for (int s = 0; s < mdp.n_states; ++s) {
            for (int a = 0; a < mdp.n_actions; ++a) {
                auto row = mdp.transition_row(s, a);
                for (int s2 = 0; s2 < mdp.n_states; ++s2) {
                    if (row[static_cast<std::size_t>(s2)] != 0.0) {
                        next.push_back(s2);
                        prob.push_back(row[static_cast<std::size_t>(s2)]);
                    }
                }
                offset.push_back(next.size());
            }
        }
    }
};

// Shared iteration scaffold: applies the backup
//   out(s,a) = r(s,a) + gamma * E_{s'} v(s'),   v(s) = agg(q.row(s), s)
// from the zero table until the sup-norm of successive iterates drops below
// tol, checking the contraction property |q_{k+1}-q_k| <= gamma |q_k-q_{k-1}|
// (with float slack) every step.
Solution iterate_to_fixpoint(const TabularMdp& mdp, double tol, long max_iterations,
                             const std::function<double(std::span<const double>, int)>& agg,
                             QTable::Kind kind) {
    if (!(tol > 0.0)) throw std::invalid_argument("solve: tolerance must be positive");
    if (max_iterations <= 0) throw std::invalid_argument("solve: iteration cap must be positive");

    const SparseRows rows(mdp);
    QTable q = QTable::zeros(mdp.n_states, mdp.n_actions);
    QTable next = q;
    std::vector<double> v(static_cast<std::size_t>(mdp.n_states));

    double prev_diff = -1.0;
    for (long it = 1; it <= max_iterations; ++it) {
        for (int s = 0; s < mdp.n_states; ++s) v[static_cast<std::size_t>(s)] = agg(q.row(s), s);
        double diff = 0.0;
        double norm = 0.0;
        for (int s = 0; s < mdp.n_states; ++s) {
            const bool terminal = mdp.terminal[static_cast<std::size_t>(s)] != 0;
            for (int a = 0; a < mdp.n_actions; ++a) {
                double cont = 0.0;
                if (!terminal) {
                    const std::size_t sa = static_cast<std::size_t>(s) * mdp.n_actions + a;
                    for (std::size_t i = rows.offset[sa]; i < rows.offset[sa + 1]; ++i)
                        cont += rows.prob[i] * v[static_cast<std::size_t>(rows.next[i])];
                    cont *= mdp.gamma;
                }
                double value = mdp.r(s, a) + cont;
                next.at(s, a) = value;
                diff = std::max(diff, std::abs(value - q.at(s, a)));
                norm = std::max(norm, std::abs(value));
            }
        }
        if (prev_diff >= 0.0) {
            double slack = 1e-12 * (1.0 + norm);
            if (diff > mdp.gamma * prev_diff + slack)
                throw std::logic_error("solve: backup contracted by less than gamma");
        }
        std::swap(q, next);
        if (diff < tol) {
            q.kind = kind;
            return Solution{std::move(q), it, diff};
        }
        prev_diff = diff;
    }
    throw std::runtime_error("solve: no convergence within iteration cap");
}

void check_shapes(const TabularMdp& mdp, const QTable& q) {
    if (q.n_states != mdp.n_states || q.n_actions != mdp.n_actions)
        throw std::invalid_argument("backup: table shape does not match the MDP");
}

} // namespace

double soft_state_value(std::span<const double> q_row, std::span<const double> prior_row,
                        double beta) {
    // (1/beta) log sum_a prior(a) exp(beta q(a)), shifted by the row max so the
    // exponentials stay in range for any beta.
    double m = max_of_row(q_row);
    double acc = 0.0;
    for (std::size_t a = 0; a < q_row.size(); ++a)
        acc += prior_row[a] * std::exp(beta * (q_row[a] - m));
    return m + std::log(acc) / beta;
}

QTable bellman_backup_standard(const TabularMdp& mdp, const QTable& q) {
    check_shapes(mdp, q);
    std::vector<double> v(static_cast<std::size_t>(mdp.n_states));
    for (int s = 0; s < mdp.n_states; ++s) v[static_cast<std::size_t>(s)] = max_of_row(q.row(s));

    QTable out = QTable::zeros(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            double cont = 0.0;
            if (!mdp.terminal[static_cast<std::size_t>(s)]) {
                auto row = mdp.transition_row(s, a);
                for (int s2 = 0; s2 < mdp.n_states; ++s2)
                    cont += row[static_cast<std::size_t>(s2)] * v[static_cast<std::size_t>(s2)];
                cont *= mdp.gamma;
            }
            out.at(s, a) = mdp.r(s, a) + cont;
        }
    }
    return out;
}

QTable bellman_backup_soft(const TabularMdp& mdp, const QTable& q, const SoftConfig& cfg) {
    check_shapes(mdp, q);
    cfg.validate(mdp.n_states, mdp.n_actions);

    std::vector<double> v(static_cast<std::size_t>(mdp.n_states));
    for (int s = 0; s < mdp.n_states; ++s)
        v[static_cast<std::size_t>(s)] = soft_state_value(q.row(s), cfg.prior.row(s), cfg.beta);

    QTable out = QTable::zeros(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            double cont = 0.0;
            if (!mdp.terminal[static_cast<std::size_t>(s)]) {
                auto row = mdp.transition_row(s, a);
                for (int s2 = 0; s2 < mdp.n_states; ++s2)
                    cont += row[static_cast<std::size_t>(s2)] * v[static_cast<std::size_t>(s2)];
                cont *= mdp.gamma;
            }
            out.at(s, a) = mdp.r(s, a) + cont;
        }
    }
    return out;
}

Solution solve_standard(const TabularMdp& mdp, double tol, long max_iterations) {
    mdp.validate();
    return iterate_to_fixpoint(
        mdp, tol, max_iterations,
        [](std::span<const double> row, int) { return max_of_row(row); },
        QTable::Kind::OptimalStandard);
}

Solution solve_soft(const TabularMdp& mdp, const SoftConfig& cfg, double tol, long max_iterations) {
    mdp.validate();
    cfg.validate(mdp.n_states, mdp.n_actions);
    return iterate_to_fixpoint(
        mdp, tol, max_iterations,
        [&](std::span<const double> row, int s) {
            return soft_state_value(row, cfg.prior.row(s), cfg.beta);
        },
        QTable::Kind::OptimalSoft);
}

Policy greedy_policy(const QTable& q) {
    Policy pi;
    pi.n_states = q.n_states;
    pi.n_actions = q.n_actions;
    pi.kind = PolicyKind::Greedy;
    pi.probs.assign(static_cast<std::size_t>(q.n_states) * q.n_actions, 0.0);
    for (int s = 0; s < q.n_states; ++s) {
        int best = 0;
        for (int a = 1; a < q.n_actions; ++a)
            if (q.at(s, a) > q.at(s, best)) best = a; // strict: ties keep the lowest index
        pi.at(s, best) = 1.0;
    }
    return pi;
}

Policy boltzmann_policy(const QTable& q, const SoftConfig& cfg) {
    cfg.validate(q.n_states, q.n_actions);
    Policy pi;
    pi.n_states = q.n_states;
    pi.n_actions = q.n_actions;
    pi.kind = PolicyKind::Boltzmann;
    pi.probs.assign(static_cast<std::size_t>(q.n_states) * q.n_actions, 0.0);
    for (int s = 0; s < q.n_states; ++s) {
        auto row = q.row(s);
        double m = max_of_row(row);
        double z = 0.0;
        for (int a = 0; a < q.n_actions; ++a) {
            double w = cfg.prior.at(s, a) * std::exp(cfg.beta * (row[static_cast<std::size_t>(a)] - m));
            pi.at(s, a) = w;
            z += w;
        }
        for (int a = 0; a < q.n_actions; ++a) pi.at(s, a) /= z;
    }
    return pi;
}

Solution evaluate_policy_standard(const TabularMdp& mdp, const Policy& pi, double tol,
                                  long max_iterations) {
    mdp.validate();
    pi.validate();
    if (pi.n_states != mdp.n_states || pi.n_actions != mdp.n_actions)
        throw std::invalid_argument("evaluate_policy: policy shape does not match the MDP");

    return iterate_to_fixpoint(
        mdp, tol, max_iterations,
        [&](std::span<const double> row, int s) {
            double acc = 0.0;
            for (std::size_t a = 0; a < row.size(); ++a)
                acc += pi.at(s, static_cast<int>(a)) * row[a];
            return acc;
        },
        QTable::Kind::PolicyValue);
}

Solution evaluate_policy_soft(const TabularMdp& mdp, const Policy& pi, const SoftConfig& cfg,
                              double tol, long max_iterations) {
    mdp.validate();
    pi.validate();
    cfg.validate(mdp.n_states, mdp.n_actions);
    if (pi.n_states != mdp.n_states || pi.n_actions != mdp.n_actions)
        throw std::invalid_argument("evaluate_policy: policy shape does not match the MDP");
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
            if (pi.at(s, a) > 0.0 && cfg.prior.at(s, a) <= 0.0)
                throw std::domain_error(
                    "evaluate_policy_soft: pi places mass outside the prior's support");

    // Per-state KL(pi || prior) is constant across iterations; fold it once.
    std::vector<double> kl(static_cast<std::size_t>(mdp.n_states), 0.0);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) {
            double p = pi.at(s, a);
            if (p > 0.0) kl[static_cast<std::size_t>(s)] += p * std::log(p / cfg.prior.at(s, a));
        }

    return iterate_to_fixpoint(
        mdp, tol, max_iterations,
        [&](std::span<const double> row, int s) {
            double acc = 0.0;
            for (std::size_t a = 0; a < row.size(); ++a)
                acc += pi.at(s, static_cast<int>(a)) * row[a];
            return acc - kl[static_cast<std::size_t>(s)] / cfg.beta;
        },
        QTable::Kind::PolicyValue);
}

} // namespace qbound
