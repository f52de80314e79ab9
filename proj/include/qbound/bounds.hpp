#pragma once

#include <optional>
#include <utility>

#include "qbound/conditions.hpp"
#include "qbound/mdp.hpp"
#include "qbound/solve.hpp"
#include "qbound/transfer.hpp"

namespace qbound {

struct BoundOptions {
    double tol = 1e-10;
    long max_iterations = 1000000;
    /// How far the auxiliary reward may dip below zero before it is treated as
    /// an internal inconsistency. Perturbed-input (epsilon) pipelines pass a
    /// looser value because their auxiliary rewards legitimately go negative.
    double reward_negativity_tol = 1e-9;
};

/// f folded over the primitive optimal tables and collapsed over actions:
/// standard regime takes max_a f(Q(s,a)); the entropy-regularized regime takes
/// the prior-weighted log-sum-exp at inverse temperature beta.
std::vector<double> value_f(const TransferFn& f, const std::vector<QTable>& qs, Regime regime,
                            const SoftConfig* cfg = nullptr);

/// Auxiliary task output: its reward table, its solved value, and the solve cost.
struct AuxValue {
    QTable value;
    std::vector<double> reward;
    long iterations = 0;
};

/// Upper-gap certificate for convex-classified f:
///   r_C(s,a) = f(r(s,a)) + gamma E_{s'} V_f(s') - f(Q(s,a))   (zero continuation at terminals)
///   C        = standard optimal value of the auxiliary task (hard max even in
///              the entropy-regularized regime).
/// composite must be the transformed task (its reward table equals f applied to
/// the primitive rewards and its dynamics are the shared ones). Throws
/// std::invalid_argument when f is not convex-classified for the regime, and
/// std::runtime_error when r_C drops below -opts.reward_negativity_tol.
AuxValue compute_C(const TabularMdp& composite, const TransferFn& f, const std::vector<QTable>& qs,
                   Regime regime, const SoftConfig* cfg = nullptr, const BoundOptions& opts = {});

/// Lower-gap certificate for concave-classified f, with
///   rhat_C(s,a) = f(Q(s,a)) - f(r(s,a)) - gamma E_{s'} V_f(s'),
/// the exact negation of r_C formed with the same V_f.
AuxValue compute_C_hat(const TabularMdp& composite, const TransferFn& f,
                       const std::vector<QTable>& qs, Regime regime,
                       const SoftConfig* cfg = nullptr, const BoundOptions& opts = {});

/// Zero-shot policy from the transformed primitive tables: greedy over f(Q) in
/// the standard regime, Boltzmann (prior, beta) over f(Q) otherwise.
Policy zero_shot_policy(const TransferFn& f, const std::vector<QTable>& qs, Regime regime,
                        const SoftConfig* cfg = nullptr);

/// Which recursion the entropy-regularized regret uses: the displayed plain
/// discounted evaluation (default), or the soft value of pi_f (KL term inside).
enum class SoftRegretForm { Displayed, SoftValue };

/// Regret certificate for the convex side: Qtilde - Q^{pi_f} <= D entrywise.
/// Standard regime:
///   r_D(s,a) = gamma E_{s'} E_{a'~pi_f}[ max_b{f(Q(s',b)) + C(s',b)} - f(Q(s',a')) ]
/// The entropy-regularized regime swaps the hard max for the prior log-sum-exp
/// and the pi_f expectation for V_f:
///   r_D(s,a) = gamma E_{s'}[ softvalue(f(Q)+C)(s') - V_f(s') ]
/// D is the pi_f-evaluation of the auxiliary reward; Displayed uses the plain
/// discounted recursion (this is the certified form), SoftValue evaluates the
/// same reward with the KL term inside as a diagnostic.
AuxValue compute_D(const TabularMdp& composite, const TransferFn& f, const std::vector<QTable>& qs,
                   const QTable& c, Regime regime, const SoftConfig* cfg = nullptr,
                   const BoundOptions& opts = {}, SoftRegretForm form = SoftRegretForm::Displayed);

/// Concave-side regret certificate:
///   standard: rhat_D(s,a) = gamma E_{s'} E_{a'~pi_f}[ V_f(s') - f(Q(s',a')) + Chat(s',a') ]
///   soft:     rhat_D(s,a) = gamma E_{s'} E_{a'~pi_f}[ Chat(s',a') ]
AuxValue compute_D_hat(const TabularMdp& composite, const TransferFn& f,
                       const std::vector<QTable>& qs, const QTable& c_hat, Regime regime,
                       const SoftConfig* cfg = nullptr, const BoundOptions& opts = {},
                       SoftRegretForm form = SoftRegretForm::Displayed);

/// One-line worst-case gap: max_{s,a} r_C(s,a) / (1 - gamma).
double crude_c_bound(const std::vector<double>& reward_c, double gamma);

struct EpsilonSpec {
    double epsilon = 0.0;
    double lipschitz = 0.0; // may be below f's own bound; the larger one is used
};

/// Interval widening for eps-optimal primitive tables. Convex side:
///   [f(Qbar) - L*eps,  f(Qbar) + Cbar + 2 L eps / (1-gamma)]
/// Concave side mirrors it. c_bar must have been computed from the same
/// perturbed tables. L is the larger of f's own bound and spec.lipschitz;
/// throws when neither is available.
std::pair<QTable, QTable> epsilon_bounds(const TransferFn& f, const std::vector<QTable>& q_bars,
                                         const EpsilonSpec& spec, const QTable& c_bar,
                                         Classification cls, double gamma);

struct BoundCheck {
    bool pass = true;
    double max_lower_violation = 0.0;
    double max_upper_violation = 0.0;
    int worst_state = -1;
    int worst_action = -1;
};

/// Entrywise lower - tol <= q <= upper + tol.
BoundCheck verify_bounds(const QTable& q, const QTable& lower, const QTable& upper, double tol);

/// Full certificate for one transformed task.
struct BoundReport {
    Regime regime = Regime::Standard;
    Classification classification = Classification::Unknown;
    QTable lower, upper;
    QTable aux_c;    // C (convex) or Chat (concave)
    QTable regret_d; // D or Dhat
    double crude_c = 0.0;
    double gap_mean = 0.0, gap_max = 0.0; // interval width statistics
    Policy zero_shot;
    int clamped_cells = 0; // degenerate intervals snapped to their midpoint
    double gamma = 0.0;
    std::optional<double> beta;
    double tol = 0.0;
    std::string transfer_expr;
    std::vector<std::string> notes;
};

/// Runs the whole pipeline: classify f (using its stored classification, or
/// check_conditions over the sampled Q range when unknown), build the interval
/// for the certified side, the regret certificate, the crude bound, and the
/// zero-shot policy. Neither-classified functions throw std::invalid_argument.
BoundReport make_bound_report(const TabularMdp& composite, const TransferFn& f,
                              const std::vector<QTable>& qs, Regime regime,
                              const SoftConfig* cfg = nullptr, const BoundOptions& opts = {});

/// JSON text of a report (tables row-major, metadata included).
std::string bound_report_json(const BoundReport& report);

} // namespace qbound
