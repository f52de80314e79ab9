#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <vector>

#include "helpers.hpp"
#include "qbound/conditions.hpp"
#include "qbound/transfer.hpp"

using namespace qbound;

namespace {

double ev(const TransferFn& f, std::initializer_list<double> xs) {
    std::vector<double> v(xs);
    return f.eval(v);
}

std::vector<double> probe(std::mt19937_64& rng, int arity, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> x(static_cast<std::size_t>(arity));
    for (auto& v : x) v = d(rng);
    return x;
}

const ConditionVerdict& find_verdict(const std::vector<ConditionVerdict>& set,
                                     const std::string& name) {
    auto it = std::find_if(set.begin(), set.end(),
                           [&](const ConditionVerdict& v) { return v.name == name; });
    REQUIRE(it != set.end());
    return *it;
}

}  // namespace

TEST_CASE("pointwise evaluation of the stock functions") {
    CHECK(ev(TransferFn::or_max(2), {1.0, 3.0}) == 3.0);
    CHECK(ev(TransferFn::or_max(3), {-2.0, -5.0, -1.0}) == -1.0);
    CHECK(ev(TransferFn::and_min(2), {1.0, 3.0}) == 1.0);
    CHECK(ev(TransferFn::not_negate(), {-1.0}) == 1.0);
    CHECK(ev(TransferFn::linear(0.5), {4.0}) == 2.0);
    CHECK(ev(TransferFn::linear(-2.0), {3.0}) == -6.0);
    CHECK(ev(TransferFn::conical_combo({0.4, 0.8}), {1.0, 2.0}) == doctest::Approx(2.0));
    CHECK(ev(TransferFn::convex_combo({0.5, 0.5}), {2.0, 4.0}) == doctest::Approx(3.0));
}

TEST_CASE("arity checks on evaluation") {
    auto f = TransferFn::or_max(2);
    CHECK(f.arity() == 2);
    CHECK_THROWS_AS(ev(f, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(ev(f, {1.0, 2.0, 3.0}), std::invalid_argument);
    CHECK(TransferFn::not_negate().arity() == 1);
    CHECK(TransferFn::linear(2.0).arity() == 1);
    CHECK(TransferFn::conical_combo({1.0, 2.0, 3.0}).arity() == 3);
}

TEST_CASE("factory input validation") {
    CHECK_THROWS_AS(TransferFn::or_max(0), std::invalid_argument);
    CHECK_THROWS_AS(TransferFn::and_min(0), std::invalid_argument);
    CHECK_THROWS_AS(TransferFn::linear(std::nan("")), std::invalid_argument);
    CHECK_THROWS_AS(TransferFn::conical_combo({}), std::invalid_argument);
    CHECK_THROWS_AS(TransferFn::conical_combo({0.5, -0.1}), std::invalid_argument);
    CHECK_THROWS_AS(TransferFn::convex_combo({0.6, 0.6}), std::invalid_argument);
    CHECK_THROWS_AS(TransferFn::convex_combo({-0.2, 0.4}), std::invalid_argument);
}

TEST_CASE("transform_reward applies the function entrywise") {
    std::vector<double> ra = {0.0, -0.5, 1.0, -1.0};
    std::vector<double> rb = {-1.0, -0.5, -2.0, -0.25};

    auto hi = transform_reward(TransferFn::or_max(2), {ra, rb});
    REQUIRE(hi.size() == 4);
    CHECK(hi[0] == 0.0);
    CHECK(hi[1] == -0.5);
    CHECK(hi[2] == 1.0);

    auto lo = transform_reward(TransferFn::and_min(2), {ra, rb});
    CHECK(lo[0] == -1.0);
    CHECK(lo[2] == -2.0);

    auto negated = transform_reward(TransferFn::not_negate(), {rb});
    CHECK(negated[0] == 1.0);
    CHECK(negated[3] == 0.25);

    CHECK_THROWS_AS(transform_reward(TransferFn::or_max(2), {ra}), std::invalid_argument);
    std::vector<double> shorter = {1.0, 2.0};
    CHECK_THROWS_AS(transform_reward(TransferFn::or_max(2), {ra, shorter}),
                    std::invalid_argument);
}

TEST_CASE("apply_transfer combines tables entrywise") {
    QTable q1 = QTable::zeros(2, 2);
    q1.values = {1.0, -2.0, 0.5, 0.0};
    QTable q2 = q1;
    q2.values = {3.0, -1.0, 0.25, -4.0};

    auto out = apply_transfer(TransferFn::or_max(2), {q1, q2});
    CHECK(out.n_states == 2);
    CHECK(out.n_actions == 2);
    CHECK(out.values == std::vector<double>{3.0, -1.0, 0.5, 0.0});

    auto half = apply_transfer(TransferFn::linear(0.5), {q1});
    CHECK(half.values[1] == -1.0);

    CHECK_THROWS_AS(apply_transfer(TransferFn::or_max(2), {q1}), std::invalid_argument);
    QTable wide = QTable::zeros(2, 3);
    CHECK_THROWS_AS(apply_transfer(TransferFn::or_max(2), {q1, wide}), std::invalid_argument);
    CHECK_THROWS_AS(apply_transfer(TransferFn::or_max(2), std::vector<QTable>{}),
                    std::invalid_argument);
}

TEST_CASE("expression grammar round trips") {
    const char* exprs[] = {
        "max(x1, x2)",
        "min(x1, x2, x3)",
        "neg(x1)",
        "0.5 * x1",
        "0.4 * x1 + 0.8 * x2",
        "0.25 * x1 + 0.25 * x2 + 0.5 * x3",
        "max(x1, min(x2, x3))",
        "x1 * x1 - 5",
        "-x1 + 2 * x2",
    };
    std::mt19937_64 rng(7);
    for (const char* text : exprs) {
        CAPTURE(text);
        auto f = parse_transfer(text);
        auto g = parse_transfer(f.expression());
        CHECK(g.arity() == f.arity());
        for (int t = 0; t < 20; ++t) {
            auto x = probe(rng, f.arity(), -10.0, 10.0);
            CHECK(f.eval(x) == doctest::Approx(g.eval(x)).epsilon(1e-12));
        }
    }
}

TEST_CASE("parser rejects malformed input") {
    CHECK_THROWS_AS(parse_transfer(""), std::invalid_argument);
    CHECK_THROWS_AS(parse_transfer("max(x1)"), std::invalid_argument);
    CHECK_THROWS_AS(parse_transfer("x0"), std::invalid_argument);
    CHECK_THROWS_AS(parse_transfer("1 +"), std::invalid_argument);
    CHECK_THROWS_AS(parse_transfer("foo(x1, x2)"), std::invalid_argument);
    CHECK_THROWS_AS(parse_transfer("max(x1, x2"), std::invalid_argument);
    CHECK_THROWS_AS(parse_transfer("x1 x2"), std::invalid_argument);
}

TEST_CASE("parsing a catalog shape recovers its stored data") {
    auto or2 = parse_transfer("max(x1, x2)");
    CHECK(or2.kind() == TransferFn::Kind::OrMax);
    CHECK(or2.classification(Regime::Standard) == Classification::ConvexConditions);
    CHECK(or2.lipschitz() == 1.0);

    auto and3 = parse_transfer("min(x1, x2, x3)");
    CHECK(and3.kind() == TransferFn::Kind::AndMin);
    CHECK(and3.classification(Regime::Standard) == Classification::ConcaveConditions);

    auto neg = parse_transfer("neg(x1)");
    CHECK(neg.kind() == TransferFn::Kind::NotNegate);
    CHECK(neg.classification(Regime::Standard) == Classification::ConvexConditions);

    auto scaled = parse_transfer("0.5 * x1");
    CHECK(scaled.classification(Regime::Standard) == Classification::Both);
    CHECK(scaled.classification(Regime::EntropyRegularized) ==
          Classification::ConcaveConditions);

    auto blend = parse_transfer("0.5 * x1 + 0.5 * x2");
    CHECK(blend.classification(Regime::Standard) == Classification::ConcaveConditions);
    CHECK(blend.lipschitz() == doctest::Approx(1.0));

    auto odd = parse_transfer("x1 * x1 - 5");
    CHECK(odd.kind() == TransferFn::Kind::Custom);
    CHECK(odd.classification(Regime::Standard) == Classification::Unknown);
    CHECK(!odd.has_lipschitz());
}

TEST_CASE("stored classification table for the standard regime") {
    auto c = [](const TransferFn& f) { return f.classification(Regime::Standard); };
    CHECK(c(TransferFn::or_max(2)) == Classification::ConvexConditions);
    CHECK(c(TransferFn::or_max(4)) == Classification::ConvexConditions);
    CHECK(c(TransferFn::and_min(2)) == Classification::ConcaveConditions);
    CHECK(c(TransferFn::not_negate()) == Classification::ConvexConditions);
    CHECK(c(TransferFn::linear(1.0)) == Classification::Both);
    CHECK(c(TransferFn::linear(0.5)) == Classification::Both);
    CHECK(c(TransferFn::linear(2.0)) == Classification::Both);
    CHECK(c(TransferFn::linear(0.0)) == Classification::Both);
    CHECK(c(TransferFn::linear(-1.0)) == Classification::ConvexConditions);
    // one active weight behaves like plain scaling, two or more do not
    CHECK(c(TransferFn::conical_combo({0.7})) == Classification::Both);
    CHECK(c(TransferFn::conical_combo({0.7, 0.0})) == Classification::Both);
    CHECK(c(TransferFn::conical_combo({0.4, 0.8})) == Classification::ConcaveConditions);
    CHECK(c(TransferFn::convex_combo({0.5, 0.5})) == Classification::ConcaveConditions);
    CHECK(c(TransferFn::convex_combo({1.0, 0.0})) == Classification::Both);
}

TEST_CASE("stored classification table for the entropy regularized regime") {
    auto c = [](const TransferFn& f) { return f.classification(Regime::EntropyRegularized); };
    CHECK(c(TransferFn::or_max(2)) == Classification::ConvexConditions);
    CHECK(c(TransferFn::and_min(2)) == Classification::ConcaveConditions);
    CHECK(c(TransferFn::not_negate()) == Classification::ConvexConditions);
    CHECK(c(TransferFn::linear(1.0)) == Classification::Both);
    CHECK(c(TransferFn::linear(0.0)) == Classification::Both);
    CHECK(c(TransferFn::linear(0.5)) == Classification::ConcaveConditions);
    CHECK(c(TransferFn::linear(2.0)) == Classification::ConvexConditions);
    CHECK(c(TransferFn::linear(-1.0)) == Classification::ConvexConditions);
    CHECK(c(TransferFn::conical_combo({0.3, 0.5})) == Classification::ConcaveConditions);
    CHECK(c(TransferFn::conical_combo({0.4, 0.8})) == Classification::Neither);
    CHECK(c(TransferFn::conical_combo({2.0})) == Classification::ConvexConditions);
    CHECK(c(TransferFn::convex_combo({0.5, 0.5})) == Classification::ConcaveConditions);
}

TEST_CASE("classification names") {
    CHECK(to_string(Classification::ConvexConditions) == "convex-conditions");
    CHECK(to_string(Classification::ConcaveConditions) == "concave-conditions");
    CHECK(to_string(Classification::Both) == "both");
    CHECK(to_string(Classification::Neither) == "neither");
    CHECK(to_string(Classification::Unknown) == "unknown");
}

TEST_CASE("condition checker agrees with the stored catalog") {
    std::vector<TransferFn> fns;
    fns.push_back(TransferFn::or_max(2));
    fns.push_back(TransferFn::and_min(2));
    fns.push_back(TransferFn::not_negate());
    fns.push_back(TransferFn::linear(0.5));
    fns.push_back(TransferFn::linear(2.0));
    fns.push_back(TransferFn::linear(-1.0));
    fns.push_back(TransferFn::conical_combo({0.4, 0.8}));
    fns.push_back(TransferFn::convex_combo({0.5, 0.5}));

    for (auto regime : {Regime::Standard, Regime::EntropyRegularized}) {
        for (const auto& f : fns) {
            CAPTURE(f.expression());
            CAPTURE(static_cast<int>(regime));
            DomainBox box = DomainBox::symmetric(f.arity(), -20.0, 0.0);
            auto report = check_conditions(f, box, regime);
            CHECK(report.classification == f.classification(regime));
            CHECK(report.regime == regime);
        }
    }
}

TEST_CASE("condition checker flags a shifted square as neither") {
    auto f = parse_transfer("x1 * x1 - 5");
    DomainBox box = DomainBox::symmetric(1, -20.0, 0.0);
    for (auto regime : {Regime::Standard, Regime::EntropyRegularized}) {
        auto report = check_conditions(f, box, regime);
        CHECK(report.classification == Classification::Neither);
        bool convex_broken = false, concave_broken = false;
        for (const auto& v : report.convex_set)
            if (!v.holds) {
                convex_broken = true;
                CHECK(v.worst_violation > 0.0);
                CHECK(!v.witness.empty());
            }
        for (const auto& v : report.concave_set)
            if (!v.holds) concave_broken = true;
        CHECK(convex_broken);
        CHECK(concave_broken);
    }
}

TEST_CASE("condition checker with an explicit soft configuration") {
    SoftConfig cfg;
    cfg.beta = 5.0;
    cfg.prior = Policy::uniform(1, 4);
    DomainBox box = DomainBox::symmetric(2, -20.0, 0.0);

    auto low = check_conditions(TransferFn::and_min(2), box, Regime::EntropyRegularized, &cfg);
    CHECK(low.classification == Classification::ConcaveConditions);

    // halving stays on the concave side at any inverse temperature
    DomainBox unary = DomainBox::symmetric(1, -20.0, 0.0);
    auto half = check_conditions(TransferFn::linear(0.5), unary, Regime::EntropyRegularized, &cfg);
    CHECK(half.classification == Classification::ConcaveConditions);

    // a skewed prior reweights the exchange probe rows but not the verdicts here
    cfg.prior.probs = {0.7, 0.1, 0.1, 0.1};
    auto hi = check_conditions(TransferFn::or_max(2), box, Regime::EntropyRegularized, &cfg);
    CHECK(hi.classification == Classification::ConvexConditions);
}

TEST_CASE("deterministic dynamics exclude the shape verdicts from the decision") {
    auto f = TransferFn::and_min(2);
    DomainBox box = DomainBox::symmetric(2, -20.0, 0.0);

    auto strict = check_conditions(f, box, Regime::Standard);
    const auto& mid = find_verdict(strict.convex_set, "convexity");
    CHECK(!mid.holds);
    CHECK(!mid.excluded_from_decision);

    DomainBox det = box;
    det.deterministic_dynamics = true;
    auto relaxed = check_conditions(f, det, Regime::Standard);
    const auto& mid_det = find_verdict(relaxed.convex_set, "convexity");
    CHECK(!mid_det.holds);
    CHECK(mid_det.excluded_from_decision);
    const auto& ccv_det = find_verdict(relaxed.concave_set, "concavity");
    CHECK(ccv_det.excluded_from_decision);
    // min still fails subadditivity, so the convex side stays uncertified
    CHECK(relaxed.classification == Classification::ConcaveConditions);
    CHECK(!relaxed.notes.empty());
}

TEST_CASE("domain box validation") {
    DomainBox box = DomainBox::symmetric(2, -5.0, 0.0);
    CHECK(box.lo.size() == 2);
    CHECK(box.samples_per_axis == 64);
    CHECK(box.random_samples == 10000);
    CHECK_NOTHROW(box.validate(2));
    CHECK_THROWS_AS(box.validate(3), std::invalid_argument);

    DomainBox bad = box;
    bad.lo[0] = 1.0;  // lo above hi
    CHECK_THROWS_AS(bad.validate(2), std::invalid_argument);

    DomainBox empty = box;
    empty.random_samples = -1;
    CHECK_THROWS_AS(empty.validate(2), std::invalid_argument);
}

TEST_CASE("report rendering mentions every inequality once per side") {
    DomainBox box = DomainBox::symmetric(2, -5.0, 0.0);
    box.random_samples = 500;
    auto report = check_conditions(TransferFn::or_max(2), box, Regime::Standard);
    auto text = to_string(report);
    CHECK(text.find("convex set:") != std::string::npos);
    CHECK(text.find("concave set:") != std::string::npos);
    CHECK(text.find("exchange") != std::string::npos);
    CHECK(text.find("convex-conditions") != std::string::npos);
}

TEST_CASE("lipschitz bounds are certified on random probes") {
    std::vector<TransferFn> fns;
    fns.push_back(TransferFn::or_max(3));
    fns.push_back(TransferFn::and_min(2));
    fns.push_back(TransferFn::not_negate());
    fns.push_back(TransferFn::linear(0.5));
    fns.push_back(TransferFn::linear(-2.0));
    fns.push_back(TransferFn::conical_combo({0.4, 0.8}));
    fns.push_back(TransferFn::convex_combo({0.25, 0.75}));

    std::mt19937_64 rng(99);
    for (const auto& f : fns) {
        CAPTURE(f.expression());
        const double L = f.lipschitz();
        CHECK(L >= 0.0);
        for (int t = 0; t < 400; ++t) {
            auto x = probe(rng, f.arity(), -30.0, 5.0);
            auto y = probe(rng, f.arity(), -30.0, 5.0);
            double dx = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i)
                dx = std::max(dx, std::abs(x[i] - y[i]));
            CHECK(std::abs(f.eval(x) - f.eval(y)) <= L * dx + 1e-12);
        }
    }
    CHECK(TransferFn::or_max(2).lipschitz() == 1.0);
    CHECK(TransferFn::linear(-2.0).lipschitz() == 2.0);
    CHECK(TransferFn::conical_combo({0.4, 0.8}).lipschitz() == doctest::Approx(1.2));
}

TEST_CASE("custom expressions have no free lipschitz bound") {
    auto f = parse_transfer("x1 * x1 - 5");
    CHECK_THROWS_AS(f.lipschitz(), std::invalid_argument);
    f.set_lipschitz(40.0);
    CHECK(f.has_lipschitz());
    CHECK(f.lipschitz() == 40.0);
    CHECK_THROWS_AS(f.set_lipschitz(-1.0), std::invalid_argument);
}

TEST_CASE("sums of compatible functions") {
    auto sum = sum_fns(TransferFn::linear(0.3), TransferFn::linear(0.4), Regime::Standard);
    CHECK(sum.arity() == 1);
    CHECK(ev(sum, {2.0}) == doctest::Approx(1.4));
    CHECK(sum.lipschitz() == doctest::Approx(0.7));
    CHECK(sum.classification(Regime::Standard) == Classification::Both);

    auto both_convex = sum_fns(TransferFn::or_max(2), TransferFn::or_max(2), Regime::Standard);
    CHECK(both_convex.classification(Regime::Standard) == Classification::ConvexConditions);
    CHECK(ev(both_convex, {1.0, 5.0}) == 10.0);

    auto both_concave = sum_fns(TransferFn::and_min(2), TransferFn::and_min(2), Regime::Standard);
    CHECK(both_concave.classification(Regime::Standard) == Classification::ConcaveConditions);
    CHECK(!both_concave.note().empty());

    CHECK_THROWS_AS(sum_fns(TransferFn::or_max(2), TransferFn::and_min(2), Regime::Standard),
                    std::invalid_argument);
    CHECK_THROWS_AS(sum_fns(TransferFn::or_max(2), TransferFn::not_negate(), Regime::Standard),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        sum_fns(parse_transfer("x1 * x1 - 5"), TransferFn::linear(1.0), Regime::Standard),
        std::invalid_argument);
}

TEST_CASE("composition of compatible functions") {
    auto chain = compose_fns(TransferFn::linear(0.5), TransferFn::linear(0.4), Regime::Standard);
    CHECK(ev(chain, {10.0}) == doctest::Approx(2.0));
    CHECK(chain.lipschitz() == doctest::Approx(0.2));
    CHECK(chain.classification(Regime::Standard) == Classification::Both);

    auto scaled_or = compose_fns(TransferFn::linear(0.5), TransferFn::or_max(2), Regime::Standard);
    CHECK(scaled_or.arity() == 2);
    CHECK(ev(scaled_or, {2.0, 6.0}) == 3.0);
    CHECK(scaled_or.classification(Regime::Standard) == Classification::ConvexConditions);
    CHECK(scaled_or.lipschitz() == doctest::Approx(0.5));

    // the outer function must be non-decreasing for the ordering to survive
    CHECK_THROWS_AS(
        compose_fns(TransferFn::not_negate(), TransferFn::or_max(2), Regime::Standard),
        std::invalid_argument);
    CHECK_THROWS_AS(
        compose_fns(TransferFn::linear(-1.0), TransferFn::or_max(2), Regime::Standard),
        std::invalid_argument);
    // the outer function must be unary
    CHECK_THROWS_AS(
        compose_fns(TransferFn::or_max(2), TransferFn::and_min(2), Regime::Standard),
        std::invalid_argument);
    // mixed classifications do not compose: halving is concave-only in the
    // entropy-regularized regime while max is convex-only there
    CHECK_THROWS_AS(
        compose_fns(TransferFn::linear(0.5), TransferFn::or_max(2),
                    Regime::EntropyRegularized),
        std::invalid_argument);
    auto doubled_or =
        compose_fns(TransferFn::linear(2.0), TransferFn::or_max(2), Regime::EntropyRegularized);
    CHECK(doubled_or.classification(Regime::EntropyRegularized) ==
          Classification::ConvexConditions);
}

TEST_CASE("round tripped sums and compositions evaluate identically") {
    auto sum =
        sum_fns(TransferFn::conical_combo({0.3, 0.0}), TransferFn::or_max(2), Regime::Standard);
    auto back = parse_transfer(sum.expression());
    std::mt19937_64 rng(3);
    for (int t = 0; t < 30; ++t) {
        auto x = probe(rng, sum.arity(), -15.0, 0.0);
        CHECK(sum.eval(x) == doctest::Approx(back.eval(x)).epsilon(1e-12));
    }
}
