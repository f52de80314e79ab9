#include "qbound/transfer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

#include "qbound/rng.hpp"

namespace qbound {

std::string to_string(Classification c) {
    switch (c) {
    case Classification::ConvexConditions: return "convex-conditions";
    case Classification::ConcaveConditions: return "concave-conditions";
    case Classification::Both: return "both";
    case Classification::Neither: return "neither";
    case Classification::Unknown: return "unknown";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Expression AST

struct ExprNode {
    enum class Op { Num, Var, Add, Sub, Mul, Neg, Min, Max };

    Op op = Op::Num;
    double num = 0.0;
    int var = 0; // zero-based
    std::vector<std::shared_ptr<const ExprNode>> kids;

    double eval(std::span<const double> xs) const {
        switch (op) {
        case Op::Num: return num;
        case Op::Var: return xs[static_cast<std::size_t>(var)];
        case Op::Add: return kids[0]->eval(xs) + kids[1]->eval(xs);
        case Op::Sub: return kids[0]->eval(xs) - kids[1]->eval(xs);
        case Op::Mul: return kids[0]->eval(xs) * kids[1]->eval(xs);
        case Op::Neg: return -kids[0]->eval(xs);
        case Op::Min: {
            double m = kids[0]->eval(xs);
            for (std::size_t i = 1; i < kids.size(); ++i) m = std::min(m, kids[i]->eval(xs));
            return m;
        }
        case Op::Max: {
            double m = kids[0]->eval(xs);
            for (std::size_t i = 1; i < kids.size(); ++i) m = std::max(m, kids[i]->eval(xs));
            return m;
        }
        }
        return 0.0;
    }

    int max_var() const {
        int m = op == Op::Var ? var + 1 : 0;
        for (const auto& k : kids) m = std::max(m, k->max_var());
        return m;
    }

    std::string render(const std::vector<std::string>& names) const;
};

namespace {

std::string fmt_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::shared_ptr<const ExprNode> make_node(ExprNode n) {
    return std::make_shared<const ExprNode>(std::move(n));
}

} // namespace

std::string ExprNode::render(const std::vector<std::string>& names) const {
    switch (op) {
    case Op::Num: return fmt_num(num);
    case Op::Var: return names[static_cast<std::size_t>(var)];
    case Op::Add: return "(" + kids[0]->render(names) + " + " + kids[1]->render(names) + ")";
    case Op::Sub: return "(" + kids[0]->render(names) + " - " + kids[1]->render(names) + ")";
    case Op::Mul: return "(" + kids[0]->render(names) + " * " + kids[1]->render(names) + ")";
    case Op::Neg: return "neg(" + kids[0]->render(names) + ")";
    case Op::Min:
    case Op::Max: {
        std::string out = op == Op::Min ? "min(" : "max(";
        for (std::size_t i = 0; i < kids.size(); ++i) {
            if (i) out += ", ";
            out += kids[i]->render(names);
        }
        return out + ")";
    }
    }
    return "";
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser {
public:
    explicit Parser(const std::string& text) : text_(text) {}

    std::shared_ptr<const ExprNode> parse() {
        auto node = expr();
        skip_ws();
        if (pos_ != text_.size())
            throw std::invalid_argument("parse_transfer: trailing input at '" +
                                        text_.substr(pos_) + "'");
        return node;
    }

private:
    std::shared_ptr<const ExprNode> expr() {
        auto lhs = term();
        for (;;) {
            skip_ws();
            if (consume('+')) {
                lhs = make_node({ExprNode::Op::Add, 0, 0, {lhs, term()}});
            } else if (consume('-')) {
                lhs = make_node({ExprNode::Op::Sub, 0, 0, {lhs, term()}});
            } else {
                return lhs;
            }
        }
    }

    std::shared_ptr<const ExprNode> term() {
        auto lhs = unary();
        for (;;) {
            skip_ws();
            if (consume('*')) {
                lhs = make_node({ExprNode::Op::Mul, 0, 0, {lhs, unary()}});
            } else {
                return lhs;
            }
        }
    }

    std::shared_ptr<const ExprNode> unary() {
        skip_ws();
        if (consume('-')) return make_node({ExprNode::Op::Neg, 0, 0, {unary()}});
        return primary();
    }

    std::shared_ptr<const ExprNode> primary() {
        skip_ws();
        if (pos_ >= text_.size()) throw std::invalid_argument("parse_transfer: unexpected end of input");
        char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (consume('(')) {
            auto node = expr();
            expect(')');
            return node;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return ident();
        throw std::invalid_argument(std::string("parse_transfer: unexpected character '") + c + "'");
    }

    std::shared_ptr<const ExprNode> number() {
        const char* start = text_.c_str() + pos_;
        char* end = nullptr;
        double v = std::strtod(start, &end);
        if (end == start) throw std::invalid_argument("parse_transfer: bad number");
        pos_ += static_cast<std::size_t>(end - start);
        ExprNode n;
        n.op = ExprNode::Op::Num;
        n.num = v;
        return make_node(std::move(n));
    }

    std::shared_ptr<const ExprNode> ident() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        std::string name = text_.substr(start, pos_ - start);
        if (name == "min" || name == "max") {
            expect('(');
            std::vector<std::shared_ptr<const ExprNode>> kids;
            kids.push_back(expr());
            while (true) {
                skip_ws();
                if (consume(',')) {
                    kids.push_back(expr());
                } else {
                    break;
                }
            }
            expect(')');
            if (kids.size() < 2)
                throw std::invalid_argument("parse_transfer: " + name + " needs at least two arguments");
            ExprNode n;
            n.op = name == "min" ? ExprNode::Op::Min : ExprNode::Op::Max;
            n.kids = std::move(kids);
            return make_node(std::move(n));
        }
        if (name == "neg") {
            expect('(');
            auto kid = expr();
            expect(')');
            return make_node({ExprNode::Op::Neg, 0, 0, {kid}});
        }
        if (name.size() >= 2 && name[0] == 'x' && name[1] != '0') {
            for (std::size_t i = 1; i < name.size(); ++i)
                if (!std::isdigit(static_cast<unsigned char>(name[i])))
                    throw std::invalid_argument("parse_transfer: unknown identifier '" + name + "'");
            long idx = std::strtol(name.c_str() + 1, nullptr, 10);
            if (idx < 1 || idx > 64)
                throw std::invalid_argument("parse_transfer: variable index out of range in '" + name + "'");
            ExprNode n;
            n.op = ExprNode::Op::Var;
            n.var = static_cast<int>(idx - 1);
            return make_node(std::move(n));
        }
        throw std::invalid_argument("parse_transfer: unknown identifier '" + name + "'");
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    bool consume(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!consume(c))
            throw std::invalid_argument(std::string("parse_transfer: expected '") + c + "'");
    }

    const std::string& text_;
    std::size_t pos_ = 0;
};

// Attempts to read the AST as sum_i coeff_i * x_i + constant.
struct LinearForm {
    std::vector<double> coeffs;
    double constant = 0.0;
};

std::optional<LinearForm> linearize(const ExprNode& n, int arity) {
    switch (n.op) {
    case ExprNode::Op::Num: {
        LinearForm f;
        f.coeffs.assign(static_cast<std::size_t>(arity), 0.0);
        f.constant = n.num;
        return f;
    }
    case ExprNode::Op::Var: {
        LinearForm f;
        f.coeffs.assign(static_cast<std::size_t>(arity), 0.0);
        f.coeffs[static_cast<std::size_t>(n.var)] = 1.0;
        return f;
    }
    case ExprNode::Op::Add:
    case ExprNode::Op::Sub: {
        auto a = linearize(*n.kids[0], arity);
        auto b = linearize(*n.kids[1], arity);
        if (!a || !b) return std::nullopt;
        double sign = n.op == ExprNode::Op::Add ? 1.0 : -1.0;
        for (int i = 0; i < arity; ++i) a->coeffs[i] += sign * b->coeffs[i];
        a->constant += sign * b->constant;
        return a;
    }
    case ExprNode::Op::Neg: {
        auto a = linearize(*n.kids[0], arity);
        if (!a) return std::nullopt;
        for (double& c : a->coeffs) c = -c;
        a->constant = -a->constant;
        return a;
    }
    case ExprNode::Op::Mul: {
        auto a = linearize(*n.kids[0], arity);
        auto b = linearize(*n.kids[1], arity);
        if (!a || !b) return std::nullopt;
        auto pure = [](const LinearForm& f) {
            return std::all_of(f.coeffs.begin(), f.coeffs.end(), [](double c) { return c == 0.0; });
        };
        if (pure(*a)) std::swap(a, b);
        if (!pure(*b)) return std::nullopt; // product of two non-constant forms
        for (double& c : a->coeffs) c *= b->constant;
        a->constant *= b->constant;
        return a;
    }
    default: return std::nullopt;
    }
}

// Pure min/max over each variable exactly once?
bool is_full_var_list(const ExprNode& n, int arity) {
    if (static_cast<int>(n.kids.size()) != arity) return false;
    std::vector<bool> seen(static_cast<std::size_t>(arity), false);
    for (const auto& k : n.kids) {
        if (k->op != ExprNode::Op::Var) return false;
        if (seen[static_cast<std::size_t>(k->var)]) return false;
        seen[static_cast<std::size_t>(k->var)] = true;
    }
    return true;
}

Classification soft_linear_class(double k) {
    if (k > 1.0) return Classification::ConvexConditions;
    if (k == 1.0 || k == 0.0) return Classification::Both;
    if (k > 0.0) return Classification::ConcaveConditions;
    return Classification::ConvexConditions; // k < 0: Jensen on the convex map t^k
}

Classification standard_linear_class(double k) {
    return k >= 0.0 ? Classification::Both : Classification::ConvexConditions;
}

void classify_combo(TransferFn& fn, const std::vector<double>& w, bool convex_budget);

} // namespace

// ---------------------------------------------------------------------------
// Catalog factories

TransferFn TransferFn::linear(double k) {
    if (!std::isfinite(k)) throw std::invalid_argument("linear: k must be finite");
    TransferFn f;
    f.kind_ = Kind::Linear;
    f.arity_ = 1;
    f.k_ = k;
    f.lipschitz_ = std::abs(k);
    f.standard_class_ = standard_linear_class(k);
    f.soft_class_ = soft_linear_class(k);
    return f;
}

TransferFn TransferFn::or_max(int arity) {
    if (arity < 1) throw std::invalid_argument("or_max: arity must be positive");
    TransferFn f;
    f.kind_ = Kind::OrMax;
    f.arity_ = arity;
    f.lipschitz_ = 1.0;
    f.standard_class_ = arity == 1 ? Classification::Both : Classification::ConvexConditions;
    f.soft_class_ = f.standard_class_;
    return f;
}

TransferFn TransferFn::and_min(int arity) {
    if (arity < 1) throw std::invalid_argument("and_min: arity must be positive");
    TransferFn f;
    f.kind_ = Kind::AndMin;
    f.arity_ = arity;
    f.lipschitz_ = 1.0;
    f.standard_class_ = arity == 1 ? Classification::Both : Classification::ConcaveConditions;
    f.soft_class_ = f.standard_class_;
    return f;
}

TransferFn TransferFn::not_negate() {
    TransferFn f;
    f.kind_ = Kind::NotNegate;
    f.arity_ = 1;
    f.lipschitz_ = 1.0;
    // The negation bound arrives through the convex set in both regimes; the
    // transformed task sits above -Q, never below it.
    f.standard_class_ = Classification::ConvexConditions;
    f.soft_class_ = Classification::ConvexConditions;
    return f;
}

namespace {

void classify_combo(TransferFn& fn, const std::vector<double>& w, bool /*convex_budget*/) {
    int positives = 0;
    double sum = 0.0;
    for (double v : w) {
        if (v > 0.0) ++positives;
        sum += v;
    }
    if (positives <= 1) {
        // A single active weight behaves like a plain scaling of that argument.
        fn.set_classification(Regime::Standard, standard_linear_class(sum));
        fn.set_classification(Regime::EntropyRegularized, soft_linear_class(sum));
        return;
    }
    fn.set_classification(Regime::Standard, Classification::ConcaveConditions);
    // Generalized Hoelder needs the weights to fit a unit budget; above it the
    // exchange condition fails in both directions.
    fn.set_classification(Regime::EntropyRegularized, sum <= 1.0 + 1e-12
                                                          ? Classification::ConcaveConditions
                                                          : Classification::Neither);
}

} // namespace

TransferFn TransferFn::conical_combo(std::vector<double> weights) {
    if (weights.empty()) throw std::invalid_argument("conical_combo: needs at least one weight");
    for (double w : weights)
        if (!std::isfinite(w) || w < 0.0)
            throw std::invalid_argument("conical_combo: weights must be non-negative");
    TransferFn f;
    f.kind_ = Kind::ConicalCombo;
    f.arity_ = static_cast<int>(weights.size());
    f.weights_ = std::move(weights);
    f.lipschitz_ = std::accumulate(f.weights_.begin(), f.weights_.end(), 0.0);
    classify_combo(f, f.weights_, false);
    return f;
}

TransferFn TransferFn::convex_combo(std::vector<double> weights) {
    if (weights.empty()) throw std::invalid_argument("convex_combo: needs at least one weight");
    double sum = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0)
            throw std::invalid_argument("convex_combo: weights must be non-negative");
        sum += w;
    }
    if (sum > 1.0 + 1e-12)
        throw std::invalid_argument("convex_combo: weights must sum to at most 1");
    TransferFn f;
    f.kind_ = Kind::ConvexCombo;
    f.arity_ = static_cast<int>(weights.size());
    f.weights_ = std::move(weights);
    f.lipschitz_ = sum;
    classify_combo(f, f.weights_, true);
    return f;
}

// ---------------------------------------------------------------------------
// Evaluation and accessors

double TransferFn::eval(std::span<const double> args) const {
    if (static_cast<int>(args.size()) != arity_)
        throw std::invalid_argument("TransferFn: expected " + std::to_string(arity_) +
                                    " arguments, got " + std::to_string(args.size()));
    switch (kind_) {
    case Kind::Linear: return k_ * args[0];
    case Kind::OrMax: {
        double m = args[0];
        for (double v : args) m = std::max(m, v);
        return m;
    }
    case Kind::AndMin: {
        double m = args[0];
        for (double v : args) m = std::min(m, v);
        return m;
    }
    case Kind::NotNegate: return -args[0];
    case Kind::ConicalCombo:
    case Kind::ConvexCombo: {
        double acc = 0.0;
        for (std::size_t i = 0; i < args.size(); ++i) acc += weights_[i] * args[i];
        return acc;
    }
    case Kind::Sum: return lhs_->eval(args) + rhs_->eval(args);
    case Kind::Compose: {
        double inner = rhs_->eval(args);
        return lhs_->eval(std::span<const double>(&inner, 1));
    }
    case Kind::Custom: return expr_->eval(args);
    }
    return 0.0;
}

double TransferFn::lipschitz() const {
    if (!lipschitz_)
        throw std::invalid_argument("TransferFn: no Lipschitz bound known for this function");
    return *lipschitz_;
}

TransferFn& TransferFn::set_lipschitz(double l) {
    if (!std::isfinite(l) || l < 0.0)
        throw std::invalid_argument("set_lipschitz: bound must be non-negative and finite");
    lipschitz_ = l;
    return *this;
}

Classification TransferFn::classification(Regime regime) const {
    return regime == Regime::Standard ? standard_class_ : soft_class_;
}

TransferFn& TransferFn::set_classification(Regime regime, Classification c) {
    (regime == Regime::Standard ? standard_class_ : soft_class_) = c;
    return *this;
}

std::string TransferFn::render(const std::vector<std::string>& names) const {
    switch (kind_) {
    case Kind::Linear: return fmt_num(k_) + "*" + names[0];
    case Kind::OrMax:
    case Kind::AndMin: {
        std::string out = kind_ == Kind::OrMax ? "max(" : "min(";
        for (int i = 0; i < arity_; ++i) {
            if (i) out += ", ";
            out += names[static_cast<std::size_t>(i)];
        }
        return out + ")";
    }
    case Kind::NotNegate: return "neg(" + names[0] + ")";
    case Kind::ConicalCombo:
    case Kind::ConvexCombo: {
        std::string out;
        for (int i = 0; i < arity_; ++i) {
            if (i) out += " + ";
            out += fmt_num(weights_[static_cast<std::size_t>(i)]) + "*" +
                   names[static_cast<std::size_t>(i)];
        }
        return out;
    }
    case Kind::Sum: return "(" + lhs_->render(names) + ") + (" + rhs_->render(names) + ")";
    case Kind::Compose: {
        std::vector<std::string> inner{"(" + rhs_->render(names) + ")"};
        return lhs_->render(inner);
    }
    case Kind::Custom: return expr_->render(names);
    }
    return "";
}

std::string TransferFn::expression() const {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(arity_));
    for (int i = 1; i <= arity_; ++i) names.push_back("x" + std::to_string(i));
    return render(names);
}

// ---------------------------------------------------------------------------
// Parsing with catalog promotion

TransferFn parse_transfer(const std::string& text) {
    auto root = Parser(text).parse();
    int arity = std::max(1, root->max_var());

    if (auto lf = linearize(*root, arity); lf && lf->constant == 0.0) {
        int negatives = 0;
        for (double c : lf->coeffs)
            if (c < 0.0) ++negatives;
        if (arity == 1) {
            if (lf->coeffs[0] == -1.0) return TransferFn::not_negate();
            return TransferFn::linear(lf->coeffs[0]);
        }
        if (negatives == 0) return TransferFn::conical_combo(lf->coeffs);
        // Mixed-sign combination: no catalog row; fall through to custom.
    }
    if (root->op == ExprNode::Op::Max && is_full_var_list(*root, arity))
        return TransferFn::or_max(arity);
    if (root->op == ExprNode::Op::Min && is_full_var_list(*root, arity))
        return TransferFn::and_min(arity);
    if (root->op == ExprNode::Op::Neg && root->kids[0]->op == ExprNode::Op::Var && arity == 1)
        return TransferFn::not_negate();

    TransferFn f;
    f.kind_ = TransferFn::Kind::Custom;
    f.arity_ = arity;
    f.expr_ = std::move(root);
    return f;
}

// ---------------------------------------------------------------------------
// Table application

QTable apply_transfer(const TransferFn& f, const std::vector<QTable>& qs) {
    if (qs.empty()) throw std::invalid_argument("apply_transfer: no input tables");
    if (static_cast<int>(qs.size()) != f.arity())
        throw std::invalid_argument("apply_transfer: " + std::to_string(qs.size()) +
                                    " tables for an arity-" + std::to_string(f.arity()) +
                                    " function");
    for (const auto& q : qs)
        if (!q.same_shape(qs[0])) throw std::invalid_argument("apply_transfer: shape mismatch");

    QTable out = QTable::zeros(qs[0].n_states, qs[0].n_actions);
    std::vector<double> args(qs.size());
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        for (std::size_t k = 0; k < qs.size(); ++k) args[k] = qs[k].values[i];
        out.values[i] = f.eval(args);
    }
    return out;
}

std::vector<double> transform_reward(const TransferFn& f,
                                     const std::vector<std::vector<double>>& rewards) {
    if (rewards.empty()) throw std::invalid_argument("transform_reward: no input tables");
    if (static_cast<int>(rewards.size()) != f.arity())
        throw std::invalid_argument("transform_reward: table count does not match arity");
    for (const auto& r : rewards)
        if (r.size() != rewards[0].size())
            throw std::invalid_argument("transform_reward: shape mismatch");

    std::vector<double> out(rewards[0].size());
    std::vector<double> args(rewards.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (std::size_t k = 0; k < rewards.size(); ++k) args[k] = rewards[k][i];
        out[i] = f.eval(args);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Closure operations

namespace {

bool usable(Classification c) {
    return c == Classification::ConvexConditions || c == Classification::ConcaveConditions ||
           c == Classification::Both;
}

// Both acts as a wildcard; Convex/Concave conflict.
std::optional<Classification> meet(Classification a, Classification b) {
    if (!usable(a) || !usable(b)) return std::nullopt;
    if (a == Classification::Both) return b;
    if (b == Classification::Both) return a;
    if (a == b) return a;
    return std::nullopt;
}

Classification inherit_other_regime(const TransferFn& f, const TransferFn& g, Regime other) {
    auto m = meet(f.classification(other), g.classification(other));
    return m.value_or(Classification::Unknown);
}

} // namespace

TransferFn sum_fns(const TransferFn& f, const TransferFn& g, Regime regime) {
    if (f.arity() != g.arity())
        throw std::invalid_argument("sum_fns: arity mismatch (" + std::to_string(f.arity()) +
                                    " vs " + std::to_string(g.arity()) + ")");
    Classification cf = f.classification(regime), cg = g.classification(regime);
    if (!usable(cf) || !usable(cg))
        throw std::invalid_argument("sum_fns: both operands must be classified for the regime");
    auto shared = meet(cf, cg);
    if (!shared)
        throw std::invalid_argument("sum_fns: mixed classifications (" + to_string(cf) + " + " +
                                    to_string(cg) + ")");

    TransferFn out;
    out.kind_ = TransferFn::Kind::Sum;
    out.arity_ = f.arity();
    out.lhs_ = std::make_shared<TransferFn>(f);
    out.rhs_ = std::make_shared<TransferFn>(g);
    Regime other = regime == Regime::Standard ? Regime::EntropyRegularized : Regime::Standard;
    out.set_classification(regime, *shared);
    out.set_classification(other, inherit_other_regime(f, g, other));
    if (f.has_lipschitz() && g.has_lipschitz()) out.lipschitz_ = f.lipschitz() + g.lipschitz();
    if (*shared == Classification::ConcaveConditions)
        out.note_ = "sum closure on the concave side: inherited classification rests on the "
                    "inequality form of the exchange condition";
    return out;
}

TransferFn compose_fns(const TransferFn& f, const TransferFn& g, Regime regime, double probe_lo,
                       double probe_hi) {
    if (f.arity() != 1)
        throw std::invalid_argument("compose_fns: outer function must be unary");
    if (!(probe_lo < probe_hi))
        throw std::invalid_argument("compose_fns: bad probe interval");

    // Sample g over the probe box, then require f to be non-decreasing across
    // the observed range. Catches a decreasing outer function (e.g. negation).
    Rng rng(0x9bb0c0de5eedull);
    std::vector<double> values;
    values.reserve(4096);
    std::vector<double> point(static_cast<std::size_t>(g.arity()));
    for (int i = 0; i < 4096; ++i) {
        for (double& x : point) x = rng.uniform(probe_lo, probe_hi);
        values.push_back(g.eval(point));
    }
    std::sort(values.begin(), values.end());
    double prev = f.eval(std::span<const double>(&values.front(), 1));
    for (std::size_t i = 1; i < values.size(); ++i) {
        double cur = f.eval(std::span<const double>(&values[i], 1));
        if (cur < prev - 1e-12)
            throw std::invalid_argument(
                "compose_fns: outer function is not non-decreasing on the inner range");
        prev = cur;
    }

    Classification cf = f.classification(regime), cg = g.classification(regime);
    if (!usable(cf) || !usable(cg))
        throw std::invalid_argument("compose_fns: both operands must be classified for the regime");
    auto shared = meet(cf, cg);
    if (!shared)
        throw std::invalid_argument("compose_fns: mixed classifications (" + to_string(cf) +
                                    " compose " + to_string(cg) + ")");

    TransferFn out;
    out.kind_ = TransferFn::Kind::Compose;
    out.arity_ = g.arity();
    out.lhs_ = std::make_shared<TransferFn>(f);
    out.rhs_ = std::make_shared<TransferFn>(g);
    Regime other = regime == Regime::Standard ? Regime::EntropyRegularized : Regime::Standard;
    out.set_classification(regime, *shared);
    out.set_classification(other, inherit_other_regime(f, g, other));
    if (f.has_lipschitz() && g.has_lipschitz()) out.lipschitz_ = f.lipschitz() * g.lipschitz();
    return out;
}

} // namespace qbound
