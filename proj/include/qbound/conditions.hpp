#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qbound/mdp.hpp"
#include "qbound/transfer.hpp"

namespace qbound {

/// Axis-aligned box the numerical certification samples from, plus the knobs
/// of the sampling scheme. gamma feeds the scaling condition; pseudo_actions
/// is the row width used by the exchange conditions.
struct DomainBox {
    std::vector<double> lo, hi;
    int samples_per_axis = 64;
    int random_samples = 10000;
    std::uint64_t rng_seed = 0;
    double gamma = 0.99;
    int pseudo_actions = 4;
    /// When the target MDP is deterministic the convexity/concavity verdict is
    /// still reported but excluded from the classification decision.
    bool deterministic_dynamics = false;
    double tolerance = 1e-9;

    static DomainBox symmetric(int arity, double lo_v, double hi_v);

    void validate(int arity) const;
};

/// Outcome of one inequality family. worst_violation is the largest positive
/// excess found (0 when the inequality held everywhere sampled); witness holds
/// the offending sample point(s), flattened.
struct ConditionVerdict {
    std::string name;
    bool holds = true;
    bool excluded_from_decision = false;
    double worst_violation = 0.0;
    std::vector<double> witness;
};

struct ConditionReport {
    Regime regime = Regime::Standard;
    Classification classification = Classification::Unknown;
    std::vector<ConditionVerdict> convex_set;  // convexity, subadditivity, scaling, exchange
    std::vector<ConditionVerdict> concave_set; // mirrored
    DomainBox box;                             // echoed so reports are self-describing
    std::vector<std::string> notes;
};

std::string to_string(const ConditionReport& report);

/// Certifies f against both sufficient-condition sets on the box by sampling:
/// a per-axis grid (meshed up to a cap) plus seeded random points, midpoint
/// tests for convexity/concavity, vector subadditivity/superadditivity,
/// gamma-scaling, and the regime's exchange condition evaluated on random
/// pseudo-Q rows (cfg prior/beta for the entropy-regularized regime; uniform
/// prior over pseudo_actions when no cfg row fits). Classification requires
/// every non-excluded inequality of a set to hold within box.tolerance.
ConditionReport check_conditions(const TransferFn& f, const DomainBox& box, Regime regime,
                                 const SoftConfig* cfg = nullptr);

} // namespace qbound
