#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qbound/mdp.hpp"

namespace qbound {

/// Which sufficient-condition set a function satisfies in a given regime.
/// ConvexConditions certifies the lower-sided interval f(Q) <= Qtilde <= f(Q)+C,
/// ConcaveConditions the upper-sided one f(Q)-Chat <= Qtilde <= f(Q).
enum class Classification { ConvexConditions, ConcaveConditions, Both, Neither, Unknown };

std::string to_string(Classification c);

struct ExprNode; // expression AST, defined in transfer.cpp

/// A reward/value transformation f : R^M -> R used to compose M solved tasks.
///
/// Catalog kinds carry their classification per regime and a Lipschitz bound
/// (sup norm on the argument vector). Custom expressions start Unknown and can
/// be classified with check_conditions.
class TransferFn {
public:
    enum class Kind {
        Linear,       // k * x1
        OrMax,        // max(x1..xM)
        AndMin,       // min(x1..xM)
        NotNegate,    // -x1
        ConicalCombo, // sum_k a_k x_k, a_k >= 0
        ConvexCombo,  // conical with sum a_k <= 1
        Sum,          // f + g, same arity
        Compose,      // f(g(x)), f unary
        Custom,       // expression tree
    };

    static TransferFn linear(double k);
    static TransferFn or_max(int arity);
    static TransferFn and_min(int arity);
    static TransferFn not_negate();
    static TransferFn conical_combo(std::vector<double> weights);
    static TransferFn convex_combo(std::vector<double> weights);

    double eval(std::span<const double> args) const;
    double operator()(std::span<const double> args) const { return eval(args); }

    Kind kind() const { return kind_; }
    int arity() const { return arity_; }

    bool has_lipschitz() const { return lipschitz_.has_value(); }
    /// Throws std::invalid_argument when no bound is known (custom functions).
    double lipschitz() const;
    TransferFn& set_lipschitz(double l);

    Classification classification(Regime regime) const;
    TransferFn& set_classification(Regime regime, Classification c);

    /// Round-trippable expression string: parse_transfer(expression()) evaluates
    /// identically. Grammar is documented at parse_transfer.
    std::string expression() const;

    /// Free-form caveat attached by closure operations (e.g. weaker verification
    /// for sums under the concave conditions); copied into condition reports.
    const std::string& note() const { return note_; }

    const std::vector<double>& weights() const { return weights_; }
    double linear_k() const { return k_; }

private:
    TransferFn() = default;
    friend TransferFn parse_transfer(const std::string&);
    friend TransferFn sum_fns(const TransferFn&, const TransferFn&, Regime);
    friend TransferFn compose_fns(const TransferFn&, const TransferFn&, Regime, double, double);

    std::string render(const std::vector<std::string>& arg_names) const;

    Kind kind_ = Kind::Custom;
    int arity_ = 1;
    double k_ = 0.0;                  // Linear
    std::vector<double> weights_;     // combos
    std::shared_ptr<const TransferFn> lhs_, rhs_; // Sum / Compose (outer, inner)
    std::shared_ptr<const ExprNode> expr_;        // Custom
    std::optional<double> lipschitz_;
    Classification standard_class_ = Classification::Unknown;
    Classification soft_class_ = Classification::Unknown;
    std::string note_;
};

/// Parses the expression grammar over arguments x1..xM:
///
///   expr    := term (('+' | '-') term)*
///   term    := unary ('*' unary)*
///   unary   := '-' unary | primary
///   primary := NUMBER | VAR | 'min' '(' expr (',' expr)+ ')'
///            | 'max' '(' expr (',' expr)+ ')' | 'neg' '(' expr ')' | '(' expr ')'
///   VAR     := 'x' [1-9][0-9]*
///
/// Arity is the largest variable index mentioned. Shapes that match a catalog
/// entry (pure min/max over all variables, neg(x1), weighted sums of variables)
/// are promoted to that entry so classification and Lipschitz data come along.
/// Throws std::invalid_argument on syntax errors.
TransferFn parse_transfer(const std::string& text);

/// Applies f entrywise across M equally-shaped tables.
QTable apply_transfer(const TransferFn& f, const std::vector<QTable>& qs);

/// Same, for flat reward tables.
std::vector<double> transform_reward(const TransferFn& f,
                                     const std::vector<std::vector<double>>& rewards);

/// Closure under addition within one regime: both operands must be classified
/// compatibly there (Both acts as a wildcard). The result keeps the shared
/// classification for that regime, inherits the other regime when compatible,
/// and adds Lipschitz bounds. Mixed classifications throw std::invalid_argument.
TransferFn sum_fns(const TransferFn& f, const TransferFn& g, Regime regime);

/// Closure under composition f(g(x)): f must be unary and non-decreasing on
/// the range of g, checked by sampling g over probe points (std::invalid_argument
/// otherwise -- this rejects not_negate as the outer function). Classification
/// inherits as with sum_fns; Lipschitz bounds multiply.
TransferFn compose_fns(const TransferFn& f, const TransferFn& g, Regime regime,
                       double probe_lo = -20.0, double probe_hi = 0.0);

} // namespace qbound
