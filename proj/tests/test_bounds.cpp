#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "helpers.hpp"
#include "oracles.hpp"
#include "qbound/bounds.hpp"
#include "qbound/envs.hpp"
#include "qbound/solve.hpp"

using namespace qbound;

namespace {

// Shared-dynamics family composed by rewriting the reward table of the first
// task, the way every dense-MDP pipeline in these tests builds composites.
TabularMdp compose_dense(const TransferFn& f, const std::vector<TabularMdp>& family) {
    std::vector<std::vector<double>> rewards;
    for (const auto& m : family) rewards.push_back(m.reward);
    TabularMdp out = family.front();
    out.reward = transform_reward(f, rewards);
    return out;
}

std::vector<QTable> solve_family(const std::vector<TabularMdp>& family) {
    std::vector<QTable> qs;
    for (const auto& m : family) qs.push_back(solve_standard(m, 1e-12).q);
    return qs;
}

std::vector<QTable> solve_family_soft(const std::vector<TabularMdp>& family,
                                      const SoftConfig& cfg) {
    std::vector<QTable> qs;
    for (const auto& m : family) qs.push_back(solve_soft(m, cfg, 1e-12).q);
    return qs;
}

}  // namespace

TEST_CASE("value_f hand examples") {
    QTable q = QTable::zeros(1, 2);
    q.values = {0.0, std::log(3.0)};

    auto v_std = value_f(TransferFn::linear(1.0), {q}, Regime::Standard);
    REQUIRE(v_std.size() == 1);
    CHECK(v_std[0] == doctest::Approx(std::log(3.0)));

    // log(0.5 * (e^0 + e^{log 3})) = log 2 at beta 1 under the uniform prior
    SoftConfig cfg = SoftConfig::uniform(1.0, 1, 2);
    auto v_soft = value_f(TransferFn::linear(1.0), {q}, Regime::EntropyRegularized, &cfg);
    CHECK(v_soft[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // max_a of the transformed row, not the transform of max_a
    QTable q2 = QTable::zeros(1, 2);
    q2.values = {-4.0, -1.0};
    auto v_or = value_f(TransferFn::or_max(2), {q, q2}, Regime::Standard);
    CHECK(v_or[0] == doctest::Approx(std::log(3.0)));
}

TEST_CASE("identity transfer has a zero certificate") {
    auto family = random_mdp_family(5, 3, -1.0, 0.0, 0.9, 1, 21);
    auto qs = solve_family(family);
    auto composite = compose_dense(TransferFn::linear(1.0), family);

    auto c = compute_C(composite, TransferFn::linear(1.0), qs, Regime::Standard);
    CHECK(sup_norm(c.value) <= 1e-8);
    for (double r : c.reward) CHECK(std::abs(r) <= 1e-9);

    // duplicating a task under max is also exact
    auto dup = compute_C(composite, TransferFn::or_max(2), {qs[0], qs[0]}, Regime::Standard);
    CHECK(sup_norm(dup.value) <= 1e-8);
}

TEST_CASE("max composition bound on a random family") {
    auto family = random_mdp_family(6, 3, -1.0, 0.0, 0.9, 2, 33);
    auto qs = solve_family(family);
    auto f = TransferFn::or_max(2);
    auto composite = compose_dense(f, family);
    auto qt = solve_standard(composite, 1e-12).q;

    auto fq = apply_transfer(f, qs);
    auto c = compute_C(composite, f, qs, Regime::Standard);

    for (std::size_t i = 0; i < qt.values.size(); ++i) {
        CHECK(qt.values[i] >= fq.values[i] - 1e-8);
        CHECK(qt.values[i] <= fq.values[i] + c.value.values[i] + 1e-8);
    }
    // certificates are non-negative up to solver noise
    for (double v : c.value.values) CHECK(v >= -1e-9);
}

TEST_CASE("min composition bound on a random family") {
    auto family = random_mdp_family(6, 3, -1.0, 0.0, 0.9, 2, 34);
    auto qs = solve_family(family);
    auto f = TransferFn::and_min(2);
    auto composite = compose_dense(f, family);
    auto qt = solve_standard(composite, 1e-12).q;

    auto fq = apply_transfer(f, qs);
    auto chat = compute_C_hat(composite, f, qs, Regime::Standard);

    for (std::size_t i = 0; i < qt.values.size(); ++i) {
        CHECK(qt.values[i] <= fq.values[i] + 1e-8);
        CHECK(qt.values[i] >= fq.values[i] - chat.value.values[i] - 1e-8);
    }
}

TEST_CASE("soft max composition bound") {
    auto family = random_mdp_family(5, 2, -1.0, 0.0, 0.85, 2, 35);
    SoftConfig cfg = SoftConfig::uniform(2.0, 5, 2);
    auto qs = solve_family_soft(family, cfg);
    auto f = TransferFn::or_max(2);
    auto composite = compose_dense(f, family);
    auto qt = solve_soft(composite, cfg, 1e-12).q;

    auto fq = apply_transfer(f, qs);
    auto c = compute_C(composite, f, qs, Regime::EntropyRegularized, &cfg);

    for (std::size_t i = 0; i < qt.values.size(); ++i) {
        CHECK(qt.values[i] >= fq.values[i] - 1e-8);
        CHECK(qt.values[i] <= fq.values[i] + c.value.values[i] + 1e-8);
    }
}

TEST_CASE("certificate side must match the classification") {
    auto family = random_mdp_family(5, 2, -1.0, 0.0, 0.9, 2, 36);
    auto qs = solve_family(family);
    auto or2 = TransferFn::or_max(2);
    auto and2 = TransferFn::and_min(2);

    auto c_task = compose_dense(and2, family);
    CHECK_THROWS_AS(compute_C(c_task, and2, qs, Regime::Standard), std::invalid_argument);
    auto d_task = compose_dense(or2, family);
    CHECK_THROWS_AS(compute_C_hat(d_task, or2, qs, Regime::Standard), std::invalid_argument);
}

TEST_CASE("garbage primitive tables are rejected as inconsistent") {
    auto family = random_mdp_family(5, 2, -1.0, -0.5, 0.9, 1, 37);
    auto composite = compose_dense(TransferFn::linear(1.0), family);
    // the zero table is far above the true value, so the auxiliary reward
    // r + gamma * 0 - 0 = r is decisively negative
    std::vector<QTable> fake = {QTable::zeros(5, 2)};
    CHECK_THROWS_AS(compute_C(composite, TransferFn::linear(1.0), fake, Regime::Standard),
                    std::runtime_error);
}

TEST_CASE("mirror certificates negate each other for two sided functions") {
    auto family = random_mdp_family(5, 3, -1.0, 0.0, 0.9, 1, 38);
    auto qs = solve_family(family);
    auto f = TransferFn::linear(0.5);
    auto composite = compose_dense(f, family);

    auto c = compute_C(composite, f, qs, Regime::Standard);
    auto chat = compute_C_hat(composite, f, qs, Regime::Standard);
    REQUIRE(c.reward.size() == chat.reward.size());
    for (std::size_t i = 0; i < c.reward.size(); ++i)
        CHECK(c.reward[i] + chat.reward[i] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("zero shot policy is scale invariant in the standard regime") {
    auto family = random_mdp_family(6, 3, -1.0, 0.0, 0.9, 2, 39);
    auto qs = solve_family(family);
    auto pi1 = zero_shot_policy(TransferFn::or_max(2), qs, Regime::Standard);
    // greedy over f(Q) only sees the argmax, which scaling preserves
    std::vector<QTable> doubled = qs;
    for (auto& q : doubled)
        for (auto& v : q.values) v *= 2.0;
    auto pi2 = zero_shot_policy(TransferFn::or_max(2), doubled, Regime::Standard);
    CHECK(pi1.probs == pi2.probs);
    CHECK(pi1.kind == PolicyKind::Greedy);

    SoftConfig cfg = SoftConfig::uniform(2.0, 6, 3);
    auto pis = zero_shot_policy(TransferFn::or_max(2), qs, Regime::EntropyRegularized, &cfg);
    CHECK(pis.kind == PolicyKind::Boltzmann);
    CHECK_NOTHROW(pis.validate());
}

TEST_CASE("identity transfer has zero regret") {
    auto family = random_mdp_family(5, 3, -1.0, 0.0, 0.9, 1, 40);
    auto qs = solve_family(family);
    auto f = TransferFn::linear(1.0);
    auto composite = compose_dense(f, family);

    auto c = compute_C(composite, f, qs, Regime::Standard);
    auto d = compute_D(composite, f, qs, c.value, Regime::Standard);
    CHECK(sup_norm(d.value) <= 1e-8);
}

TEST_CASE("regret certificate covers the zero shot gap") {
    auto family = random_mdp_family(6, 3, -1.0, 0.0, 0.9, 2, 41);
    auto qs = solve_family(family);
    auto f = TransferFn::or_max(2);
    auto composite = compose_dense(f, family);
    auto qt = solve_standard(composite, 1e-12).q;

    auto c = compute_C(composite, f, qs, Regime::Standard);
    auto d = compute_D(composite, f, qs, c.value, Regime::Standard);
    auto pi_f = zero_shot_policy(f, qs, Regime::Standard);
    auto q_pi = oracle::eval_standard(composite, pi_f);

    for (std::size_t i = 0; i < qt.values.size(); ++i) {
        CHECK(qt.values[i] - q_pi.values[i] <= d.value.values[i] + 1e-8);
        CHECK(q_pi.values[i] <= qt.values[i] + 1e-8);
        CHECK(d.value.values[i] >= -1e-9);
    }
}

TEST_CASE("concave regret certificate covers the zero shot gap") {
    auto family = random_mdp_family(6, 3, -1.0, 0.0, 0.9, 2, 42);
    auto qs = solve_family(family);
    auto f = TransferFn::and_min(2);
    auto composite = compose_dense(f, family);
    auto qt = solve_standard(composite, 1e-12).q;

    auto chat = compute_C_hat(composite, f, qs, Regime::Standard);
    auto dhat = compute_D_hat(composite, f, qs, chat.value, Regime::Standard);
    auto pi_f = zero_shot_policy(f, qs, Regime::Standard);
    auto q_pi = oracle::eval_standard(composite, pi_f);

    for (std::size_t i = 0; i < qt.values.size(); ++i) {
        CHECK(qt.values[i] - q_pi.values[i] <= dhat.value.values[i] + 1e-8);
        CHECK(dhat.value.values[i] >= -1e-9);
    }
}

TEST_CASE("soft regret certificate in both recursion forms") {
    auto family = random_mdp_family(5, 2, -1.0, 0.0, 0.85, 2, 43);
    SoftConfig cfg = SoftConfig::uniform(2.0, 5, 2);
    auto qs = solve_family_soft(family, cfg);
    auto f = TransferFn::or_max(2);
    auto composite = compose_dense(f, family);
    auto qt = solve_soft(composite, cfg, 1e-12).q;

    auto c = compute_C(composite, f, qs, Regime::EntropyRegularized, &cfg);
    auto d = compute_D(composite, f, qs, c.value, Regime::EntropyRegularized, &cfg);
    auto pi_f = zero_shot_policy(f, qs, Regime::EntropyRegularized, &cfg);
    auto q_pi = oracle::eval_standard(composite, pi_f);

    for (std::size_t i = 0; i < qt.values.size(); ++i)
        CHECK(qt.values[i] - q_pi.values[i] <= d.value.values[i] + 1e-8);

    auto diag = compute_D(composite, f, qs, c.value, Regime::EntropyRegularized, &cfg, {},
                          SoftRegretForm::SoftValue);
    CHECK(diag.value.values.size() == d.value.values.size());
}

TEST_CASE("crude bound arithmetic and dominance") {
    CHECK(crude_c_bound({0.5, 0.2}, 0.9) == doctest::Approx(5.0));
    CHECK(crude_c_bound({0.0, 0.0}, 0.5) == 0.0);

    auto family = random_mdp_family(6, 3, -1.0, 0.0, 0.9, 2, 44);
    auto qs = solve_family(family);
    auto f = TransferFn::or_max(2);
    auto composite = compose_dense(f, family);
    auto c = compute_C(composite, f, qs, Regime::Standard);
    double crude = crude_c_bound(c.reward, composite.gamma);
    CHECK(sup_norm(c.value) <= crude + 1e-8);
}

TEST_CASE("epsilon widening arithmetic") {
    QTable qbar = QTable::zeros(1, 1);
    qbar.values = {-1.0};
    QTable cbar = QTable::zeros(1, 1);
    cbar.values = {0.3};
    auto f = TransferFn::linear(1.0);

    EpsilonSpec spec;
    spec.epsilon = 0.1;
    spec.lipschitz = 0.0;
    auto [lower, upper] =
        epsilon_bounds(f, {qbar}, spec, cbar, Classification::ConvexConditions, 0.9);
    CHECK(lower.values[0] == doctest::Approx(-1.1).epsilon(1e-12));
    CHECK(upper.values[0] == doctest::Approx(1.3).epsilon(1e-12));

    // epsilon 0 collapses to the unwidened interval
    spec.epsilon = 0.0;
    auto [l0, u0] = epsilon_bounds(f, {qbar}, spec, cbar, Classification::ConvexConditions, 0.9);
    CHECK(l0.values[0] == doctest::Approx(-1.0));
    CHECK(u0.values[0] == doctest::Approx(-0.7));

    // concave side mirrors
    spec.epsilon = 0.1;
    auto [lc, uc] = epsilon_bounds(f, {qbar}, spec, cbar, Classification::ConcaveConditions, 0.9);
    CHECK(uc.values[0] == doctest::Approx(-0.9).epsilon(1e-12));
    CHECK(lc.values[0] == doctest::Approx(-3.3).epsilon(1e-12));

    // a custom function with no Lipschitz data cannot be widened
    auto custom = parse_transfer("x1 * x1 - 5");
    CHECK_THROWS_AS(
        epsilon_bounds(custom, {qbar}, spec, cbar, Classification::ConvexConditions, 0.9),
        std::invalid_argument);
    spec.lipschitz = 2.0;
    CHECK_NOTHROW(
        epsilon_bounds(custom, {qbar}, spec, cbar, Classification::ConvexConditions, 0.9));
}

TEST_CASE("bound verification reports the worst violation") {
    QTable q = QTable::zeros(2, 2);
    q.values = {0.0, 1.0, 2.0, 3.0};
    QTable lower = q, upper = q;
    CHECK(verify_bounds(q, lower, upper, 1e-12).pass);

    lower.values[3] = 3.5;  // lower bound above the value
    auto check = verify_bounds(q, lower, upper, 1e-9);
    CHECK(!check.pass);
    CHECK(check.max_lower_violation == doctest::Approx(0.5));
    CHECK(check.worst_state == 1);
    CHECK(check.worst_action == 1);

    lower.values[3] = 3.0;
    upper.values[0] = -2.0;
    auto check2 = verify_bounds(q, lower, upper, 1e-9);
    CHECK(!check2.pass);
    CHECK(check2.max_upper_violation == doctest::Approx(2.0));
}

TEST_CASE("full report pipeline on a grid pair") {
    GridParams p;
    p.slip = 0.1;
    p.step_reward = -1.0;
    p.diamond_reward = -0.5;
    p.gamma = 0.9;
    auto a = parse_grid_spec("SD.\n...", p);
    auto b = parse_grid_spec("S..\n..D", p);
    auto f = TransferFn::or_max(2);

    auto composite = compose_grids(f, {a, b});
    std::vector<QTable> qs = {solve_standard(grid_to_mdp(a), 1e-12).q,
                              solve_standard(grid_to_mdp(b), 1e-12).q};

    auto report = make_bound_report(composite, f, qs, Regime::Standard);
    CHECK(report.classification == Classification::ConvexConditions);
    CHECK(report.gamma == 0.9);
    CHECK(!report.beta.has_value());
    CHECK(report.transfer_expr == f.expression());
    CHECK(report.gap_mean >= 0.0);
    CHECK(report.gap_max >= report.gap_mean);
    CHECK(sup_norm(report.aux_c) <= report.crude_c + 1e-8);

    auto qt = solve_standard(composite, 1e-12).q;
    auto check = verify_bounds(qt, report.lower, report.upper, 1e-8);
    CHECK(check.pass);
    for (std::size_t i = 0; i < report.lower.values.size(); ++i)
        CHECK(report.lower.values[i] <= report.upper.values[i] + 1e-12);
    CHECK_NOTHROW(report.zero_shot.validate());

    auto text = bound_report_json(report);
    auto j = nlohmann::json::parse(text);
    CHECK(j["regime"] == "standard");
    CHECK(j["classification"] == "convex-conditions");
    CHECK(j["n_states"] == qt.n_states);
    CHECK(j["lower"].size() == report.lower.values.size());
    CHECK(j["gap_mean"].get<double>() == doctest::Approx(report.gap_mean));
    CHECK(j["beta"].is_null());
}

TEST_CASE("report pipeline on the soft concave side") {
    auto family = random_mdp_family(5, 2, -1.0, 0.0, 0.9, 2, 45);
    SoftConfig cfg = SoftConfig::uniform(5.0, 5, 2);
    auto qs = solve_family_soft(family, cfg);
    auto f = TransferFn::and_min(2);
    auto composite = compose_dense(f, family);

    auto report = make_bound_report(composite, f, qs, Regime::EntropyRegularized, &cfg);
    CHECK(report.classification == Classification::ConcaveConditions);
    REQUIRE(report.beta.has_value());
    CHECK(*report.beta == 5.0);

    auto qt = solve_soft(composite, cfg, 1e-12).q;
    CHECK(verify_bounds(qt, report.lower, report.upper, 1e-8).pass);

    auto j = nlohmann::json::parse(bound_report_json(report));
    CHECK(j["beta"].get<double>() == 5.0);
}

TEST_CASE("unclassifiable functions cannot be certified") {
    auto family = random_mdp_family(5, 2, -1.0, 0.0, 0.9, 2, 46);
    SoftConfig cfg = SoftConfig::uniform(1.0, 5, 2);
    auto qs = solve_family_soft(family, cfg);
    auto f = TransferFn::conical_combo({0.4, 0.8});  // over unit budget, soft side
    auto composite = compose_dense(f, family);
    CHECK_THROWS_AS(make_bound_report(composite, f, qs, Regime::EntropyRegularized, &cfg),
                    std::invalid_argument);
}
