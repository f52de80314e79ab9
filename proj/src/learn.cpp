#include "qbound/learn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qbound/rng.hpp"

namespace qbound {

namespace {

void validate_hyper(const LearnHyper& h) {
    if (!(h.alpha > 0.0) || h.alpha > 1.0)
        throw std::invalid_argument("q_learning: alpha must lie in (0,1]");
    if (h.eps_initial < 0.0 || h.eps_initial > 1.0 || h.eps_final < 0.0 || h.eps_final > 1.0)
        throw std::invalid_argument("q_learning: epsilon endpoints must lie in [0,1]");
    if (h.explore_fraction < 0.0 || h.explore_fraction > 1.0)
        throw std::invalid_argument("q_learning: explore_fraction must lie in [0,1]");
    if (h.steps < 1) throw std::invalid_argument("q_learning: steps must be positive");
    if (h.eval_every < 1) throw std::invalid_argument("q_learning: eval_every must be positive");
    if (h.eval_episodes < 0) throw std::invalid_argument("q_learning: eval_episodes negative");
    if (h.episode_cap < 1) throw std::invalid_argument("q_learning: episode_cap must be positive");
    if (!std::isfinite(h.q_init)) throw std::invalid_argument("q_learning: q_init must be finite");
}

int greedy_action(const QTable& q, int s) {
    int best = 0;
    for (int a = 1; a < q.n_actions; ++a)
        if (q.at(s, a) > q.at(s, best)) best = a;
    return best;
}

struct Enforcement {
    const QTable* lower = nullptr;
    const QTable* upper = nullptr;

    double clip(double v, int s, int a) const {
        if (lower) v = std::max(v, lower->at(s, a));
        if (upper) v = std::min(v, upper->at(s, a));
        return v;
    }
};

// Greedy rollouts from the initial distribution; select_clipped switches the
// argmax to the bound-clipped table without touching the stored one.
double eval_return(const TabularMdp& mdp, const QTable& q, const Enforcement& enforce,
                   bool select_clipped, const LearnHyper& hyper, Rng& rng) {
    double total = 0.0;
    for (int e = 0; e < hyper.eval_episodes; ++e) {
        int s = rng.categorical(mdp.initial_dist);
        double ep = 0.0;
        for (int t = 0; t < hyper.episode_cap; ++t) {
            if (mdp.terminal[static_cast<std::size_t>(s)]) break;
            int a = 0;
            if (select_clipped) {
                double best = enforce.clip(q.at(s, 0), s, 0);
                for (int b = 1; b < q.n_actions; ++b) {
                    double v = enforce.clip(q.at(s, b), s, b);
                    if (v > best) {
                        best = v;
                        a = b;
                    }
                }
            } else {
                a = greedy_action(q, s);
            }
            ep += mdp.r(s, a);
            s = rng.categorical(mdp.transition_row(s, a));
        }
        total += ep;
    }
    return hyper.eval_episodes ? total / hyper.eval_episodes : 0.0;
}

} // namespace

double bound_violation(const QTable& q, const QTable& lower) {
    if (!q.same_shape(lower)) throw std::invalid_argument("bound_violation: shape mismatch");
    if (q.values.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < q.values.size(); ++i)
        acc += std::max(0.0, lower.values[i] - q.values[i]);
    return acc / static_cast<double>(q.values.size());
}

LearnTrace q_learning(const TabularMdp& mdp, const ClipSpec& clip, const BoundTables& bounds,
                      const LearnHyper& hyper, std::uint64_t seed) {
    mdp.validate();
    validate_hyper(hyper);

    const bool wants_lower = clip.side == BoundSide::Lower || clip.side == BoundSide::Both;
    const bool wants_upper = clip.side == BoundSide::Upper || clip.side == BoundSide::Both;
    const bool uses_bounds = clip.mode != ClipMode::None;
    Enforcement enforce;
    if (uses_bounds) {
        if (wants_lower) {
            if (!bounds.lower) throw std::invalid_argument("q_learning: mode needs a lower bound table");
            enforce.lower = &*bounds.lower;
        }
        if (wants_upper) {
            if (!bounds.upper) throw std::invalid_argument("q_learning: mode needs an upper bound table");
            enforce.upper = &*bounds.upper;
        }
    }
    const QTable shape = QTable::zeros(mdp.n_states, mdp.n_actions);
    if (bounds.lower && !bounds.lower->same_shape(shape))
        throw std::invalid_argument("q_learning: lower bound table shape mismatch");
    if (bounds.upper && !bounds.upper->same_shape(shape))
        throw std::invalid_argument("q_learning: upper bound table shape mismatch");
    if (clip.mode == ClipMode::Soft || clip.mode == ClipMode::SoftHard) {
        if (!(clip.soft_weight > 0.0))
            throw std::invalid_argument("q_learning: soft_weight must be positive");
    }

    const bool hard = clip.mode == ClipMode::Hard || clip.mode == ClipMode::SoftHard;
    const bool soft = clip.mode == ClipMode::Soft || clip.mode == ClipMode::SoftHard;
    const bool clip_eval_only = clip.mode == ClipMode::Test;

    LearnTrace trace;
    trace.seed = seed;
    trace.hyper = hyper;

    QTable q = QTable::constant(mdp.n_states, mdp.n_actions, hyper.q_init);
    for (int s = 0; s < mdp.n_states; ++s) {
        if (!mdp.terminal[static_cast<std::size_t>(s)]) continue;
        // Terminal rows hold their exact values and never move.
        for (int a = 0; a < mdp.n_actions; ++a) q.at(s, a) = mdp.r(s, a);
    }
    if (hard) {
        for (int s = 0; s < mdp.n_states; ++s) {
            if (mdp.terminal[static_cast<std::size_t>(s)]) continue;
            for (int a = 0; a < mdp.n_actions; ++a) q.at(s, a) = enforce.clip(q.at(s, a), s, a);
        }
    }

    Rng train_rng(derive_seed(seed, 0));
    const long explore_steps =
        std::max<long>(1, static_cast<long>(std::llround(hyper.explore_fraction *
                                                         static_cast<double>(hyper.steps))));

    auto record_eval = [&](long step) {
        EvalPoint pt;
        pt.step = step;
        Rng eval_rng(derive_seed(seed, 1, static_cast<std::uint64_t>(trace.evals.size())));
        pt.return_mean = eval_return(mdp, q, enforce, clip_eval_only, hyper, eval_rng);
        pt.bv = bounds.lower ? bound_violation(q, *bounds.lower) : 0.0;
        trace.evals.push_back(pt);
    };

    int s = train_rng.categorical(mdp.initial_dist);
    double ep_return = 0.0;
    int ep_len = 0;
    for (long t = 0; t < hyper.steps; ++t) {
        if (t % hyper.eval_every == 0) record_eval(t);

        double eps = t < explore_steps
                         ? hyper.eps_initial + (hyper.eps_final - hyper.eps_initial) *
                                                   (static_cast<double>(t) / static_cast<double>(explore_steps))
                         : hyper.eps_final;
        int a = train_rng.uniform01() < eps ? train_rng.uniform_int(mdp.n_actions)
                                            : greedy_action(q, s);
        double r = mdp.r(s, a);
        int s2 = train_rng.categorical(mdp.transition_row(s, a));

        double boot = mdp.terminal[static_cast<std::size_t>(s2)]
                          ? 0.0
                          : q.at(s2, greedy_action(q, s2));
        double target = r + mdp.gamma * boot;
        if (hard) target = enforce.clip(target, s, a);

        double before = q.at(s, a);
        double after = before + hyper.alpha * (target - before);
        if (soft) {
            // Constant-rate pull while the pre-update entry violates a bound;
            // the subgradient of the absolute violation.
            if (enforce.lower && before < enforce.lower->at(s, a))
                after += hyper.alpha * clip.soft_weight;
            if (enforce.upper && before > enforce.upper->at(s, a))
                after -= hyper.alpha * clip.soft_weight;
        }
        if (hard) after = enforce.clip(after, s, a);
        q.at(s, a) = after;

        ep_return += r;
        ++ep_len;
        if (mdp.terminal[static_cast<std::size_t>(s2)] || ep_len >= hyper.episode_cap) {
            trace.episode_returns.push_back(ep_return);
            ep_return = 0.0;
            ep_len = 0;
            s = train_rng.categorical(mdp.initial_dist);
        } else {
            s = s2;
        }
    }
    record_eval(hyper.steps);

    trace.final_q = std::move(q);
    return trace;
}

} // namespace qbound
