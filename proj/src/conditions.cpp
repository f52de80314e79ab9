#include "qbound/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "qbound/rng.hpp"

namespace qbound {

DomainBox DomainBox::symmetric(int arity, double lo_v, double hi_v) {
    DomainBox box;
    box.lo.assign(static_cast<std::size_t>(arity), lo_v);
    box.hi.assign(static_cast<std::size_t>(arity), hi_v);
    return box;
}

void DomainBox::validate(int arity) const {
    if (static_cast<int>(lo.size()) != arity || static_cast<int>(hi.size()) != arity)
        throw std::invalid_argument("DomainBox: lo/hi must have one entry per argument");
    for (int i = 0; i < arity; ++i) {
        if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]) || !(lo[i] < hi[i]))
            throw std::invalid_argument("DomainBox: need finite lo < hi on every axis");
    }
    if (samples_per_axis < 2) throw std::invalid_argument("DomainBox: samples_per_axis < 2");
    if (random_samples < 1) throw std::invalid_argument("DomainBox: random_samples < 1");
    if (!(gamma > 0.0) || !(gamma < 1.0)) throw std::invalid_argument("DomainBox: gamma not in (0,1)");
    if (pseudo_actions < 2) throw std::invalid_argument("DomainBox: pseudo_actions < 2");
    if (!(tolerance > 0.0)) throw std::invalid_argument("DomainBox: tolerance must be positive");
}

namespace {

constexpr std::size_t kMeshCap = 4096;

// Tracks the worst signed excess of lhs over rhs for a family "lhs <= rhs".
struct Inequality {
    const char* name;
    double worst = -std::numeric_limits<double>::infinity();
    std::vector<double> witness;

    explicit Inequality(const char* n) : name(n) {}

    void feed(double lhs, double rhs, const std::vector<double>& point) {
        double excess = lhs - rhs;
        if (excess > worst) {
            worst = excess;
            witness = point;
        }
    }

    ConditionVerdict verdict(double tol, bool excluded) const {
        ConditionVerdict v;
        v.name = name;
        v.holds = worst <= tol;
        v.excluded_from_decision = excluded;
        v.worst_violation = std::max(0.0, worst);
        if (!v.holds) v.witness = witness;
        return v;
    }
};

std::vector<std::vector<double>> build_mesh(const DomainBox& box, int arity) {
    int axis_n = box.samples_per_axis;
    auto mesh_size = [&](int n) {
        std::size_t t = 1;
        for (int i = 0; i < arity; ++i) {
            t *= static_cast<std::size_t>(n);
            if (t > kMeshCap) return kMeshCap + 1;
        }
        return t;
    };
    while (axis_n > 2 && mesh_size(axis_n) > kMeshCap) --axis_n;

    std::vector<std::vector<double>> mesh;
    mesh.reserve(mesh_size(axis_n));
    std::vector<int> idx(static_cast<std::size_t>(arity), 0);
    for (;;) {
        std::vector<double> p(static_cast<std::size_t>(arity));
        for (int d = 0; d < arity; ++d) {
            double t = static_cast<double>(idx[d]) / static_cast<double>(axis_n - 1);
            p[d] = box.lo[d] + t * (box.hi[d] - box.lo[d]);
        }
        mesh.push_back(std::move(p));
        int d = 0;
        while (d < arity && ++idx[d] == axis_n) idx[d++] = 0;
        if (d == arity) break;
    }
    return mesh;
}

double weighted_softmax(double beta, std::span<const double> vals, std::span<const double> w) {
    double m = *std::max_element(vals.begin(), vals.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < vals.size(); ++i) acc += w[i] * std::exp(beta * (vals[i] - m));
    return m + std::log(acc) / beta;
}

std::string describe(const ConditionVerdict& v) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "  %-16s %s  worst violation %.3g%s", v.name.c_str(),
                  v.holds ? "holds " : "FAILS ", v.worst_violation,
                  v.excluded_from_decision ? "  (not counted)" : "");
    return buf;
}

} // namespace

ConditionReport check_conditions(const TransferFn& f, const DomainBox& box, Regime regime,
                                 const SoftConfig* cfg) {
    const int arity = f.arity();
    box.validate(arity);

    ConditionReport report;
    report.regime = regime;
    report.box = box;

    Rng rng(box.rng_seed);
    const auto mesh = build_mesh(box, arity);

    auto random_point = [&] {
        std::vector<double> p(static_cast<std::size_t>(arity));
        for (int d = 0; d < arity; ++d) p[d] = rng.uniform(box.lo[d], box.hi[d]);
        return p;
    };
    auto eval = [&](const std::vector<double>& p) { return f.eval(p); };

    // Convex-set inequalities are oriented lhs <= rhs; the concave set reuses
    // the same quantities with the sides swapped.
    Inequality cvx_mid{"convexity"}, ccv_mid{"concavity"};
    Inequality cvx_add{"subadditivity"}, ccv_add{"superadditivity"};
    Inequality cvx_scale{"gamma-scaling"}, ccv_scale{"gamma-scaling"};
    Inequality cvx_ex{"exchange"}, ccv_ex{"exchange"};

    auto feed_pair = [&](const std::vector<double>& x, const std::vector<double>& y) {
        std::vector<double> mid(x.size()), sum(x.size());
        for (std::size_t d = 0; d < x.size(); ++d) {
            mid[d] = 0.5 * (x[d] + y[d]);
            sum[d] = x[d] + y[d];
        }
        double fx = eval(x), fy = eval(y);
        std::vector<double> pair_witness = x;
        pair_witness.insert(pair_witness.end(), y.begin(), y.end());
        double fmid = eval(mid), half = 0.5 * (fx + fy);
        cvx_mid.feed(fmid, half, pair_witness);
        ccv_mid.feed(half, fmid, pair_witness);
        double fsum = eval(sum), added = fx + fy;
        cvx_add.feed(fsum, added, pair_witness);
        ccv_add.feed(added, fsum, pair_witness);
    };
    auto feed_scale = [&](const std::vector<double>& x) {
        std::vector<double> gx(x.size());
        for (std::size_t d = 0; d < x.size(); ++d) gx[d] = box.gamma * x[d];
        double lhs = eval(gx), rhs = box.gamma * eval(x);
        cvx_scale.feed(lhs, rhs, x);
        ccv_scale.feed(rhs, lhs, x);
    };

    for (const auto& p : mesh) feed_scale(p);
    for (int i = 0; i < box.random_samples; ++i) {
        auto x = random_point();
        feed_scale(x);
        feed_pair(x, random_point());
    }
    // Pairs drawn from the mesh catch corner cases random pairs can miss.
    std::size_t mesh_pairs = std::min<std::size_t>(kMeshCap, mesh.size() * mesh.size());
    auto mesh_draw = [&]() -> const std::vector<double>& {
        return mesh[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(mesh.size())))];
    };
    for (std::size_t i = 0; i < mesh_pairs; ++i) feed_pair(mesh_draw(), mesh_draw());

    // Exchange condition on random pseudo-Q rows: one row of width A per
    // argument, aggregated per argument (max, or the regime's soft value) and
    // compared against the aggregate of the transformed columns.
    const int A = box.pseudo_actions;
    const double beta = cfg ? cfg->beta : 1.0;
    const bool use_prior_rows =
        cfg && !cfg->prior.probs.empty() && cfg->prior.n_actions == A;
    std::vector<double> z(static_cast<std::size_t>(arity * A));
    std::vector<double> per_arg(static_cast<std::size_t>(arity));
    std::vector<double> column(static_cast<std::size_t>(arity));
    std::vector<double> transformed(static_cast<std::size_t>(A));
    std::vector<double> weights(static_cast<std::size_t>(A), 1.0 / A);
    for (int i = 0; i < box.random_samples; ++i) {
        for (int m = 0; m < arity; ++m)
            for (int a = 0; a < A; ++a) z[m * A + a] = rng.uniform(box.lo[m], box.hi[m]);
        if (use_prior_rows) {
            int row = rng.uniform_int(cfg->prior.n_states);
            for (int a = 0; a < A; ++a)
                weights[static_cast<std::size_t>(a)] = cfg->prior.at(row, a);
        }
        for (int a = 0; a < A; ++a) {
            for (int m = 0; m < arity; ++m) column[m] = z[m * A + a];
            transformed[a] = eval(column);
        }
        double lhs, rhs;
        if (regime == Regime::Standard) {
            for (int m = 0; m < arity; ++m)
                per_arg[m] = *std::max_element(z.begin() + m * A, z.begin() + (m + 1) * A);
            lhs = eval(per_arg);
            rhs = *std::max_element(transformed.begin(), transformed.end());
        } else {
            for (int m = 0; m < arity; ++m)
                per_arg[m] = weighted_softmax(
                    beta, std::span<const double>(z.data() + m * A, static_cast<std::size_t>(A)),
                    weights);
            lhs = eval(per_arg);
            rhs = weighted_softmax(beta, transformed, weights);
        }
        cvx_ex.feed(lhs, rhs, z);
        ccv_ex.feed(rhs, lhs, z);
    }

    const double tol = box.tolerance;
    const bool exclude_shape = box.deterministic_dynamics;
    report.convex_set = {cvx_mid.verdict(tol, exclude_shape), cvx_add.verdict(tol, false),
                         cvx_scale.verdict(tol, false), cvx_ex.verdict(tol, false)};
    report.concave_set = {ccv_mid.verdict(tol, exclude_shape), ccv_add.verdict(tol, false),
                          ccv_scale.verdict(tol, false), ccv_ex.verdict(tol, false)};

    auto set_holds = [](const std::vector<ConditionVerdict>& set) {
        return std::all_of(set.begin(), set.end(), [](const ConditionVerdict& v) {
            return v.holds || v.excluded_from_decision;
        });
    };
    bool cvx = set_holds(report.convex_set);
    bool ccv = set_holds(report.concave_set);
    if (cvx && ccv) report.classification = Classification::Both;
    else if (cvx) report.classification = Classification::ConvexConditions;
    else if (ccv) report.classification = Classification::ConcaveConditions;
    else report.classification = Classification::Neither;

    if (exclude_shape)
        report.notes.push_back(
            "deterministic dynamics: convexity/concavity reported but not counted");
    if (!f.note().empty()) report.notes.push_back(f.note());
    return report;
}

std::string to_string(const ConditionReport& report) {
    std::string out;
    out += "regime: ";
    out += report.regime == Regime::Standard ? "standard" : "entropy-regularized";
    out += "\nclassification: " + to_string(report.classification) + "\n";
    out += "convex set:\n";
    for (const auto& v : report.convex_set) out += describe(v) + "\n";
    out += "concave set:\n";
    for (const auto& v : report.concave_set) out += describe(v) + "\n";
    for (const auto& n : report.notes) out += "note: " + n + "\n";
    return out;
}

} // namespace qbound
