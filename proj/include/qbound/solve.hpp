#pragma once

#include "qbound/mdp.hpp"

namespace qbound {

/// One step of the optimality backup: r(s,a) + gamma * E_{s'} max_{a'} q(s',a'),
/// with zero continuation at terminal states.
QTable bellman_backup_standard(const TabularMdp& mdp, const QTable& q);

/// Entropy-regularized optimality backup:
///   r(s,a) + (gamma/beta) * E_{s'} log E_{a'~prior} exp(beta * q(s',a')).
/// The inner log-sum-exp is max-shifted, so large beta stays finite.
QTable bellman_backup_soft(const TabularMdp& mdp, const QTable& q, const SoftConfig& cfg);

/// Value iteration from the zero table until the sup-norm of successive
/// iterates drops below tol. Throws std::runtime_error when max_iterations
/// is hit first, and std::logic_error if a step ever contracts by less than
/// gamma (plus float slack) -- that would mean the backup is broken.
Solution solve_standard(const TabularMdp& mdp, double tol = 1e-10, long max_iterations = 1000000);

Solution solve_soft(const TabularMdp& mdp, const SoftConfig& cfg, double tol = 1e-10,
                    long max_iterations = 1000000);

/// One-hot argmax policy; ties resolve to the lowest action index.
Policy greedy_policy(const QTable& q);

/// pi(a|s) proportional to prior(a|s) * exp(beta * q(s,a)), computed max-shifted.
Policy boltzmann_policy(const QTable& q, const SoftConfig& cfg);

/// Soft state value of one Q row: (1/beta) log sum_a prior(a) exp(beta q(a)).
/// Dominates the prior-expected value (Jensen); exposed for reuse and tests.
double soft_state_value(std::span<const double> q_row, std::span<const double> prior_row,
                        double beta);

/// Fixed point of q = r + gamma * E_{s'} E_{a'~pi} q(s',a').
Solution evaluate_policy_standard(const TabularMdp& mdp, const Policy& pi, double tol = 1e-10,
                                  long max_iterations = 1000000);

/// Entropy-regularized policy value: the expectation additionally pays the
/// KL term -(1/beta) log(pi/prior) inside. pi must place mass only where the
/// prior does; otherwise std::domain_error.
Solution evaluate_policy_soft(const TabularMdp& mdp, const Policy& pi, const SoftConfig& cfg,
                              double tol = 1e-10, long max_iterations = 1000000);

} // namespace qbound
