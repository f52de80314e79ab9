#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qbound/mdp.hpp"

namespace qbound {

enum class ClipMode { None, Hard, Soft, Test, SoftHard };
enum class BoundSide { Lower, Upper, Both };

/// Optional bound tables the learner can enforce or report against.
struct BoundTables {
    std::optional<QTable> lower;
    std::optional<QTable> upper;
};

struct ClipSpec {
    ClipMode mode = ClipMode::None;
    BoundSide side = BoundSide::Lower;
    double soft_weight = 1.0;
};

struct LearnHyper {
    double alpha = 0.1;
    double eps_initial = 1.0;
    double eps_final = 0.05;
    double explore_fraction = 0.1; // epsilon anneals linearly over this prefix of steps
    long steps = 100000;
    long eval_every = 1000;
    int eval_episodes = 5;
    int episode_cap = 200;
    double q_init = 0.0;
};

struct EvalPoint {
    long step = 0;
    double return_mean = 0.0; // mean undiscounted return of the greedy rollouts
    double bv = 0.0;          // bound violation of the stored table at this step
};

struct LearnTrace {
    std::vector<EvalPoint> evals;
    std::vector<double> episode_returns;
    QTable final_q;
    std::uint64_t seed = 0;
    LearnHyper hyper;
};

/// Mean over all (s,a) of max(0, lower - q): the one-sided hinge against the
/// lower bound.
double bound_violation(const QTable& q, const QTable& lower);

/// Epsilon-greedy tabular Q-learning with optional bound clipping.
///
/// Modes: none leaves the update alone; hard clips each TD target into the
/// enforced bounds and keeps the stored table inside them (the initial table is
/// projected, so the invariant holds from step 0); soft adds an extra
/// alpha * soft_weight pull toward the bound while an entry violates it (the
/// subgradient of a |violation| penalty); test trains exactly like none and
/// clips only at greedy action selection during evaluation rollouts; soft_hard
/// stacks soft's penalty on hard's clipping.
///
/// Terminal-state rows are pinned to their immediate rewards and TD targets
/// bootstrap zero continuation at terminal successors. Evaluation runs
/// hyper.eval_episodes greedy rollouts from the initial distribution every
/// eval_every steps (step 0 included) on an RNG stream separate from training,
/// so arms with matched seeds see identical training trajectories.
///
/// Enforcing modes require the bound table(s) for their side; missing tables,
/// shape mismatches and non-positive hyperparameters throw std::invalid_argument.
LearnTrace q_learning(const TabularMdp& mdp, const ClipSpec& clip, const BoundTables& bounds,
                      const LearnHyper& hyper, std::uint64_t seed);

} // namespace qbound
