#include "qbound/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace qbound {

namespace {

void check_inputs(const TabularMdp& composite, const TransferFn& f, const std::vector<QTable>& qs,
                  Regime regime, const SoftConfig* cfg) {
    if (static_cast<int>(qs.size()) != f.arity())
        throw std::invalid_argument("bounds: table count does not match function arity");
    for (const auto& q : qs)
        if (q.n_states != composite.n_states || q.n_actions != composite.n_actions)
            throw std::invalid_argument("bounds: primitive table shape does not match the task");
    if (regime == Regime::EntropyRegularized) {
        if (!cfg) throw std::invalid_argument("bounds: entropy-regularized regime needs a SoftConfig");
        cfg->validate(composite.n_states, composite.n_actions);
    }
}

bool certifies(Classification c, bool convex_side) {
    if (c == Classification::Both) return true;
    return convex_side ? c == Classification::ConvexConditions
                       : c == Classification::ConcaveConditions;
}

// gamma * E_{s'} v(s'), zero at terminal states.
std::vector<double> discounted_expectation(const TabularMdp& m, const std::vector<double>& v) {
    std::vector<double> out(static_cast<std::size_t>(m.n_states) * m.n_actions, 0.0);
    for (int s = 0; s < m.n_states; ++s) {
        if (m.terminal[static_cast<std::size_t>(s)]) continue;
        for (int a = 0; a < m.n_actions; ++a) {
            double acc = 0.0;
            auto row = m.transition_row(s, a);
            for (int s2 = 0; s2 < m.n_states; ++s2) acc += row[static_cast<std::size_t>(s2)] * v[static_cast<std::size_t>(s2)];
            out[static_cast<std::size_t>(s) * m.n_actions + a] = m.gamma * acc;
        }
    }
    return out;
}

// Auxiliary rewards are non-negative in exact arithmetic when the conditions
// hold; fixed-point noise from finite-tol solves can push them slightly below
// zero. The allowance scales with the solve tolerance; anything past it means
// the classification or the inputs are wrong. Surviving dust is clipped to
// zero, which can only loosen the resulting certificate.
void settle_aux_reward(std::vector<double>& r, const TransferFn& f, const TabularMdp& m,
                       const BoundOptions& opts, const char* what) {
    double scale = f.has_lipschitz() ? std::max(1.0, f.lipschitz()) : 1.0;
    double allowance =
        opts.reward_negativity_tol + 4.0 * opts.tol * scale * m.gamma / (1.0 - m.gamma);
    double worst = 0.0;
    for (double v : r) worst = std::min(worst, v);
    if (worst < -allowance)
        throw std::runtime_error(std::string(what) + ": auxiliary reward is negative (" +
                                 std::to_string(worst) +
                                 "), inputs are inconsistent with the classification");
    for (double& v : r) v = std::max(0.0, v);
}

AuxValue aux_from_reward(const TabularMdp& composite, std::vector<double> reward,
                         const BoundOptions& opts) {
    TabularMdp aux = composite;
    aux.reward = std::move(reward);
    Solution sol = solve_standard(aux, opts.tol, opts.max_iterations);
    AuxValue out;
    out.value = std::move(sol.q);
    out.reward = std::move(aux.reward);
    out.iterations = sol.iterations;
    return out;
}

std::vector<double> add_rows(const QTable& a, const QTable& b) {
    std::vector<double> out(a.values.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values[i] + b.values[i];
    return out;
}

} // namespace

std::vector<double> value_f(const TransferFn& f, const std::vector<QTable>& qs, Regime regime,
                            const SoftConfig* cfg) {
    if (qs.empty()) throw std::invalid_argument("value_f: no input tables");
    QTable fq = apply_transfer(f, qs);
    std::vector<double> out(static_cast<std::size_t>(fq.n_states));
    if (regime == Regime::Standard) {
        for (int s = 0; s < fq.n_states; ++s) {
            auto row = fq.row(s);
            out[static_cast<std::size_t>(s)] = *std::max_element(row.begin(), row.end());
        }
    } else {
        if (!cfg) throw std::invalid_argument("value_f: entropy-regularized regime needs a SoftConfig");
        for (int s = 0; s < fq.n_states; ++s)
            out[static_cast<std::size_t>(s)] = soft_state_value(fq.row(s), cfg->prior.row(s), cfg->beta);
    }
    return out;
}

AuxValue compute_C(const TabularMdp& composite, const TransferFn& f, const std::vector<QTable>& qs,
                   Regime regime, const SoftConfig* cfg, const BoundOptions& opts) {
    check_inputs(composite, f, qs, regime, cfg);
    if (!certifies(f.classification(regime), true))
        throw std::invalid_argument("compute_C: function is not certified for the convex-side bound");

    QTable fq = apply_transfer(f, qs);
    std::vector<double> vf = value_f(f, qs, regime, cfg);
    std::vector<double> cont = discounted_expectation(composite, vf);
    std::vector<double> r_c(fq.values.size());
    for (std::size_t i = 0; i < r_c.size(); ++i)
        r_c[i] = composite.reward[i] + cont[i] - fq.values[i];
    settle_aux_reward(r_c, f, composite, opts, "compute_C");
    return aux_from_reward(composite, std::move(r_c), opts);
}

AuxValue compute_C_hat(const TabularMdp& composite, const TransferFn& f,
                       const std::vector<QTable>& qs, Regime regime, const SoftConfig* cfg,
                       const BoundOptions& opts) {
    check_inputs(composite, f, qs, regime, cfg);
    if (!certifies(f.classification(regime), false))
        throw std::invalid_argument(
            "compute_C_hat: function is not certified for the concave-side bound");

    QTable fq = apply_transfer(f, qs);
    std::vector<double> vf = value_f(f, qs, regime, cfg);
    std::vector<double> cont = discounted_expectation(composite, vf);
    std::vector<double> r_c(fq.values.size());
    for (std::size_t i = 0; i < r_c.size(); ++i)
        r_c[i] = fq.values[i] - composite.reward[i] - cont[i];
    settle_aux_reward(r_c, f, composite, opts, "compute_C_hat");
    return aux_from_reward(composite, std::move(r_c), opts);
}

Policy zero_shot_policy(const TransferFn& f, const std::vector<QTable>& qs, Regime regime,
                        const SoftConfig* cfg) {
    QTable fq = apply_transfer(f, qs);
    if (regime == Regime::Standard) return greedy_policy(fq);
    if (!cfg) throw std::invalid_argument("zero_shot_policy: entropy-regularized regime needs a SoftConfig");
    return boltzmann_policy(fq, *cfg);
}

AuxValue compute_D(const TabularMdp& composite, const TransferFn& f, const std::vector<QTable>& qs,
                   const QTable& c, Regime regime, const SoftConfig* cfg, const BoundOptions& opts,
                   SoftRegretForm form) {
    check_inputs(composite, f, qs, regime, cfg);
    if (!c.same_shape(QTable::zeros(composite.n_states, composite.n_actions)))
        throw std::invalid_argument("compute_D: C has the wrong shape");

    Policy pi = zero_shot_policy(f, qs, regime, cfg);
    QTable fq = apply_transfer(f, qs);
    std::vector<double> fq_plus_c = add_rows(fq, c);

    // Per-state gap between the optimistic aggregate of f(Q)+C and the policy
    // aggregate of f(Q).
    std::vector<double> w(static_cast<std::size_t>(composite.n_states), 0.0);
    for (int s = 0; s < composite.n_states; ++s) {
        std::span<const double> bonus(fq_plus_c.data() + static_cast<std::size_t>(s) * composite.n_actions,
                                      static_cast<std::size_t>(composite.n_actions));
        if (regime == Regime::Standard) {
            double best = *std::max_element(bonus.begin(), bonus.end());
            double pol = 0.0;
            for (int a = 0; a < composite.n_actions; ++a) pol += pi.at(s, a) * fq.at(s, a);
            w[static_cast<std::size_t>(s)] = best - pol;
        } else {
            double best = soft_state_value(bonus, cfg->prior.row(s), cfg->beta);
            double base = soft_state_value(fq.row(s), cfg->prior.row(s), cfg->beta);
            w[static_cast<std::size_t>(s)] = best - base;
        }
    }

    std::vector<double> r_d = discounted_expectation(composite, w);
    for (double& v : r_d) v = std::max(0.0, v);

    TabularMdp aux = composite;
    aux.reward = r_d;
    Solution sol = (form == SoftRegretForm::Displayed || regime == Regime::Standard)
                       ? evaluate_policy_standard(aux, pi, opts.tol, opts.max_iterations)
                       : evaluate_policy_soft(aux, pi, *cfg, opts.tol, opts.max_iterations);
    AuxValue out;
    out.value = std::move(sol.q);
    out.reward = std::move(r_d);
    out.iterations = sol.iterations;
    return out;
}

AuxValue compute_D_hat(const TabularMdp& composite, const TransferFn& f,
                       const std::vector<QTable>& qs, const QTable& c_hat, Regime regime,
                       const SoftConfig* cfg, const BoundOptions& opts, SoftRegretForm form) {
    check_inputs(composite, f, qs, regime, cfg);
    if (!c_hat.same_shape(QTable::zeros(composite.n_states, composite.n_actions)))
        throw std::invalid_argument("compute_D_hat: Chat has the wrong shape");

    Policy pi = zero_shot_policy(f, qs, regime, cfg);
    QTable fq = apply_transfer(f, qs);
    std::vector<double> vf = value_f(f, qs, regime, cfg);

    std::vector<double> w(static_cast<std::size_t>(composite.n_states), 0.0);
    for (int s = 0; s < composite.n_states; ++s) {
        double acc = 0.0;
        for (int a = 0; a < composite.n_actions; ++a) {
            double inner = regime == Regime::Standard
                               ? vf[static_cast<std::size_t>(s)] - fq.at(s, a) + c_hat.at(s, a)
                               : c_hat.at(s, a);
            acc += pi.at(s, a) * inner;
        }
        w[static_cast<std::size_t>(s)] = acc;
    }

    std::vector<double> r_d = discounted_expectation(composite, w);
    for (double& v : r_d) v = std::max(0.0, v);

    TabularMdp aux = composite;
    aux.reward = r_d;
    Solution sol = (form == SoftRegretForm::Displayed || regime == Regime::Standard)
                       ? evaluate_policy_standard(aux, pi, opts.tol, opts.max_iterations)
                       : evaluate_policy_soft(aux, pi, *cfg, opts.tol, opts.max_iterations);
    AuxValue out;
    out.value = std::move(sol.q);
    out.reward = std::move(r_d);
    out.iterations = sol.iterations;
    return out;
}

double crude_c_bound(const std::vector<double>& reward_c, double gamma) {
    if (reward_c.empty()) throw std::invalid_argument("crude_c_bound: empty reward");
    if (!(gamma > 0.0) || !(gamma < 1.0))
        throw std::invalid_argument("crude_c_bound: gamma not in (0,1)");
    return *std::max_element(reward_c.begin(), reward_c.end()) / (1.0 - gamma);
}

std::pair<QTable, QTable> epsilon_bounds(const TransferFn& f, const std::vector<QTable>& q_bars,
                                         const EpsilonSpec& spec, const QTable& c_bar,
                                         Classification cls, double gamma) {
    if (!(spec.epsilon >= 0.0)) throw std::invalid_argument("epsilon_bounds: epsilon must be >= 0");
    if (!(gamma > 0.0) || !(gamma < 1.0))
        throw std::invalid_argument("epsilon_bounds: gamma not in (0,1)");
    double l = 0.0;
    bool have_l = false;
    if (f.has_lipschitz()) {
        l = f.lipschitz();
        have_l = true;
    }
    if (spec.lipschitz > 0.0) {
        l = std::max(l, spec.lipschitz);
        have_l = true;
    }
    if (!have_l)
        throw std::invalid_argument("epsilon_bounds: no Lipschitz bound available");

    QTable fq = apply_transfer(f, q_bars);
    if (!fq.same_shape(c_bar)) throw std::invalid_argument("epsilon_bounds: C table shape mismatch");

    double slack = l * spec.epsilon;
    double wide = 2.0 * l * spec.epsilon / (1.0 - gamma);
    QTable lower = fq, upper = fq;
    if (certifies(cls, true)) {
        for (std::size_t i = 0; i < fq.values.size(); ++i) {
            lower.values[i] = fq.values[i] - slack;
            upper.values[i] = fq.values[i] + c_bar.values[i] + wide;
        }
    } else if (certifies(cls, false)) {
        for (std::size_t i = 0; i < fq.values.size(); ++i) {
            lower.values[i] = fq.values[i] - c_bar.values[i] - wide;
            upper.values[i] = fq.values[i] + slack;
        }
    } else {
        throw std::invalid_argument("epsilon_bounds: function is not certified for either side");
    }
    return {std::move(lower), std::move(upper)};
}

BoundCheck verify_bounds(const QTable& q, const QTable& lower, const QTable& upper, double tol) {
    if (!q.same_shape(lower) || !q.same_shape(upper))
        throw std::invalid_argument("verify_bounds: shape mismatch");
    BoundCheck check;
    for (int s = 0; s < q.n_states; ++s) {
        for (int a = 0; a < q.n_actions; ++a) {
            double below = lower.at(s, a) - q.at(s, a);
            double above = q.at(s, a) - upper.at(s, a);
            if (below > check.max_lower_violation || above > check.max_upper_violation) {
                check.worst_state = s;
                check.worst_action = a;
            }
            check.max_lower_violation = std::max(check.max_lower_violation, below);
            check.max_upper_violation = std::max(check.max_upper_violation, above);
        }
    }
    check.pass = check.max_lower_violation <= tol && check.max_upper_violation <= tol;
    return check;
}

BoundReport make_bound_report(const TabularMdp& composite, const TransferFn& f,
                              const std::vector<QTable>& qs, Regime regime, const SoftConfig* cfg,
                              const BoundOptions& opts) {
    check_inputs(composite, f, qs, regime, cfg);

    TransferFn fn = f;
    BoundReport report;
    report.regime = regime;
    report.gamma = composite.gamma;
    if (cfg) report.beta = cfg->beta;
    report.tol = opts.tol;
    report.transfer_expr = fn.expression();

    if (fn.classification(regime) == Classification::Unknown) {
        // Sample range of the inputs, padded so degenerate axes still give the
        // checker room to move.
        DomainBox box;
        box.lo.resize(qs.size());
        box.hi.resize(qs.size());
        for (std::size_t k = 0; k < qs.size(); ++k) {
            auto [mn, mx] = std::minmax_element(qs[k].values.begin(), qs[k].values.end());
            double pad = 0.5 * std::max(1.0, *mx - *mn);
            box.lo[k] = *mn - pad;
            box.hi[k] = *mx + pad;
        }
        box.gamma = composite.gamma;
        box.deterministic_dynamics = composite.deterministic_dynamics();
        ConditionReport cr = check_conditions(fn, box, regime, cfg);
        fn.set_classification(regime, cr.classification);
        report.notes.push_back("classification from numerical certification");
        for (const auto& n : cr.notes) report.notes.push_back(n);
    }
    report.classification = fn.classification(regime);
    if (report.classification == Classification::Neither ||
        report.classification == Classification::Unknown)
        throw std::invalid_argument(
            "make_bound_report: function satisfies neither sufficient-condition set");

    QTable fq = apply_transfer(fn, qs);
    bool convex_side = certifies(report.classification, true);
    AuxValue aux = convex_side ? compute_C(composite, fn, qs, regime, cfg, opts)
                               : compute_C_hat(composite, fn, qs, regime, cfg, opts);
    AuxValue regret = convex_side
                          ? compute_D(composite, fn, qs, aux.value, regime, cfg, opts)
                          : compute_D_hat(composite, fn, qs, aux.value, regime, cfg, opts);

    report.lower = fq;
    report.upper = fq;
    for (std::size_t i = 0; i < fq.values.size(); ++i) {
        if (convex_side) report.upper.values[i] += aux.value.values[i];
        else report.lower.values[i] -= aux.value.values[i];
        if (report.lower.values[i] > report.upper.values[i]) {
            double mid = 0.5 * (report.lower.values[i] + report.upper.values[i]);
            report.lower.values[i] = report.upper.values[i] = mid;
            ++report.clamped_cells;
        }
    }
    report.aux_c = std::move(aux.value);
    report.regret_d = std::move(regret.value);
    report.crude_c = crude_c_bound(aux.reward, composite.gamma);

    double total = 0.0, worst = 0.0;
    for (std::size_t i = 0; i < fq.values.size(); ++i) {
        double gap = report.upper.values[i] - report.lower.values[i];
        total += gap;
        worst = std::max(worst, gap);
    }
    report.gap_mean = fq.values.empty() ? 0.0 : total / static_cast<double>(fq.values.size());
    report.gap_max = worst;
    report.zero_shot = zero_shot_policy(fn, qs, regime, cfg);
    if (!fn.note().empty()) report.notes.push_back(fn.note());
    return report;
}

std::string bound_report_json(const BoundReport& report) {
    nlohmann::json j;
    j["regime"] = report.regime == Regime::Standard ? "standard" : "entropy-regularized";
    j["classification"] = to_string(report.classification);
    j["n_states"] = report.lower.n_states;
    j["n_actions"] = report.lower.n_actions;
    j["gamma"] = report.gamma;
    if (report.beta) j["beta"] = *report.beta;
    j["tol"] = report.tol;
    j["transfer"] = report.transfer_expr;
    j["lower"] = report.lower.values;
    j["upper"] = report.upper.values;
    j["aux_c"] = report.aux_c.values;
    j["regret_d"] = report.regret_d.values;
    j["crude_c"] = report.crude_c;
    j["gap_mean"] = report.gap_mean;
    j["gap_max"] = report.gap_max;
    j["clamped_cells"] = report.clamped_cells;
    j["zero_shot"] = report.zero_shot.probs;
    j["notes"] = report.notes;
    return j.dump(2);
}

} // namespace qbound
