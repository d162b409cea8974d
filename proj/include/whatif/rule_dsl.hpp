#pragma once

#include "whatif/common.hpp"

#include <memory>
#include <string>
#include <vector>

namespace whatif::dsl {

// Grammar, loosest binding first:
//
//   expr       := and_expr ('or' and_expr)*
//   and_expr   := not_expr ('and' not_expr)*
//   not_expr   := 'not' not_expr | comparison
//   comparison := sum (('<' | '<=' | '>' | '>=' | '==' | '!=') sum)?
//   sum        := product (('+' | '-') product)*
//   product    := unary (('*' | '/') unary)*
//   unary      := '-' unary | primary
//   primary    := NUMBER | IDENT | '(' expr ')'
//
// `not` takes a boolean operand, so `not a > b` reads as `not (a > b)`.
// Comparisons do not chain. A unary minus applied to a literal folds into
// the literal.

enum class Op { Number, Ident, Neg, Add, Sub, Mul, Div, Lt, Le, Gt, Ge, Eq, Ne, And, Or, Not };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    Op op = Op::Number;
    double number = 0.0;
    std::string name;  // identifier
    std::size_t var = 0;  // index into ParsedRule::vars
    std::vector<ExprPtr> args;
    std::size_t offset = 0;  // source position, for diagnostics

    bool is_boolean() const;
};

/// Structural equality (ignores source offsets).
bool equal(const Expr& a, const Expr& b);

struct ParsedRule {
    ExprPtr root;
    std::vector<std::string> vars;  // identifiers, in order of first appearance
};

class SyntaxError : public ConfigError {
public:
    SyntaxError(const std::string& what, std::size_t offset)
        : ConfigError(what + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

ParsedRule parse(std::string_view src);

/// Canonical text: binary operations fully parenthesized.
std::string print(const Expr& e);

/// Identifier-to-column mapping for one sample layout.
class BoundRule {
public:
    BoundRule(ParsedRule rule, const std::vector<std::string>& columns);

    /// Division by zero (or any non-finite intermediate) makes the whole
    /// rule false for that sample; see `soft_failure`.
    bool eval(std::span<const double> sample) const;
    /// Same as eval, also reporting whether a soft failure occurred.
    bool eval(std::span<const double> sample, bool& soft_failure) const;
    const ParsedRule& rule() const { return rule_; }

private:
    ParsedRule rule_;
    std::vector<std::size_t> columns_;  // per var
};

}  // namespace whatif::dsl
