#include "whatif/rule_dsl.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <optional>

namespace whatif::dsl {

namespace {

enum class Tok { Number, Ident, And, Or, Not, Plus, Minus, Star, Slash, Lt, Le, Gt, Ge, Eq, Ne, LParen, RParen, End };

struct Token {
    Tok kind = Tok::End;
    std::size_t offset = 0;
    double number = 0.0;
    std::string text;
};

std::vector<Token> lex(std::string_view s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        Token t;
        t.offset = i;
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
            std::size_t j = i;
            while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
            if (j < s.size() && s[j] == '.') {
                ++j;
                while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
            }
            if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
                if (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) {
                    while (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) ++k;
                    j = k;
                }
            }
            const std::string text(s.substr(i, j - i));
            t.kind = Tok::Number;
            t.number = std::strtod(text.c_str(), nullptr);
            if (!std::isfinite(t.number)) throw SyntaxError("numeric literal out of range", i);
            i = j;
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
            t.text = std::string(s.substr(i, j - i));
            if (t.text == "and") t.kind = Tok::And;
            else if (t.text == "or") t.kind = Tok::Or;
            else if (t.text == "not") t.kind = Tok::Not;
            else t.kind = Tok::Ident;
            i = j;
        } else {
            auto two = [&](char next) { return i + 1 < s.size() && s[i + 1] == next; };
            switch (c) {
                case '+': t.kind = Tok::Plus; break;
                case '-': t.kind = Tok::Minus; break;
                case '*': t.kind = Tok::Star; break;
                case '/': t.kind = Tok::Slash; break;
                case '(': t.kind = Tok::LParen; break;
                case ')': t.kind = Tok::RParen; break;
                case '<': t.kind = two('=') ? Tok::Le : Tok::Lt; break;
                case '>': t.kind = two('=') ? Tok::Ge : Tok::Gt; break;
                case '=':
                    if (!two('=')) throw SyntaxError("expected '=='", i);
                    t.kind = Tok::Eq;
                    break;
                case '!':
                    if (!two('=')) throw SyntaxError("expected '!='", i);
                    t.kind = Tok::Ne;
                    break;
                default: throw SyntaxError(std::string("unexpected character '") + c + "'", i);
            }
            i += (t.kind == Tok::Le || t.kind == Tok::Ge || t.kind == Tok::Eq || t.kind == Tok::Ne) ? 2 : 1;
        }
        out.push_back(std::move(t));
    }
    Token end;
    end.kind = Tok::End;
    end.offset = s.size();
    out.push_back(end);
    return out;
}

ExprPtr node(Op op, std::size_t offset, std::vector<ExprPtr> args) {
    auto e = std::make_shared<Expr>();
    e->op = op;
    e->offset = offset;
    e->args = std::move(args);
    return e;
}

class Parser {
public:
    explicit Parser(std::string_view src) : toks_(lex(src)) {}

    ParsedRule run() {
        if (toks_.size() == 1) throw SyntaxError("empty rule", 0);
        ExprPtr root = expr();
        if (peek().kind != Tok::End) throw SyntaxError("unexpected token", peek().offset);
        if (!root->is_boolean()) throw SyntaxError("rule must be a boolean condition", root->offset);
        return {root, vars_};
    }

private:
    const Token& peek() const { return toks_[pos_]; }
    Token take() { return toks_[pos_++]; }
    bool accept(Tok k) {
        if (peek().kind != k) return false;
        ++pos_;
        return true;
    }

    void need_bool(const ExprPtr& e) {
        if (!e->is_boolean()) throw SyntaxError("expected a boolean operand", e->offset);
    }
    void need_num(const ExprPtr& e) {
        if (e->is_boolean()) throw SyntaxError("expected a numeric operand", e->offset);
    }

    ExprPtr expr() {
        ExprPtr lhs = and_expr();
        while (peek().kind == Tok::Or) {
            const auto at = take().offset;
            ExprPtr rhs = and_expr();
            need_bool(lhs);
            need_bool(rhs);
            lhs = node(Op::Or, at, {lhs, rhs});
        }
        return lhs;
    }

    ExprPtr and_expr() {
        ExprPtr lhs = not_expr();
        while (peek().kind == Tok::And) {
            const auto at = take().offset;
            ExprPtr rhs = not_expr();
            need_bool(lhs);
            need_bool(rhs);
            lhs = node(Op::And, at, {lhs, rhs});
        }
        return lhs;
    }

    ExprPtr not_expr() {
        if (peek().kind == Tok::Not) {
            const auto at = take().offset;
            ExprPtr inner = not_expr();
            need_bool(inner);
            return node(Op::Not, at, {inner});
        }
        return comparison();
    }

    static std::optional<Op> cmp_op(Tok k) {
        switch (k) {
            case Tok::Lt: return Op::Lt;
            case Tok::Le: return Op::Le;
            case Tok::Gt: return Op::Gt;
            case Tok::Ge: return Op::Ge;
            case Tok::Eq: return Op::Eq;
            case Tok::Ne: return Op::Ne;
            default: return std::nullopt;
        }
    }

    ExprPtr comparison() {
        ExprPtr lhs = sum();
        if (auto op = cmp_op(peek().kind)) {
            const auto at = take().offset;
            ExprPtr rhs = sum();
            need_num(lhs);
            need_num(rhs);
            if (cmp_op(peek().kind)) throw SyntaxError("comparisons cannot be chained", peek().offset);
            return node(*op, at, {lhs, rhs});
        }
        return lhs;
    }

    ExprPtr sum() {
        ExprPtr lhs = product();
        while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
            const Token t = take();
            ExprPtr rhs = product();
            need_num(lhs);
            need_num(rhs);
            lhs = node(t.kind == Tok::Plus ? Op::Add : Op::Sub, t.offset, {lhs, rhs});
        }
        return lhs;
    }

    ExprPtr product() {
        ExprPtr lhs = unary();
        while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
            const Token t = take();
            ExprPtr rhs = unary();
            need_num(lhs);
            need_num(rhs);
            lhs = node(t.kind == Tok::Star ? Op::Mul : Op::Div, t.offset, {lhs, rhs});
        }
        return lhs;
    }

    ExprPtr unary() {
        if (peek().kind == Tok::Minus) {
            const auto at = take().offset;
            ExprPtr inner = unary();
            need_num(inner);
            if (inner->op == Op::Number) {
                auto folded = std::make_shared<Expr>(*inner);
                folded->number = -inner->number;
                folded->offset = at;
                return folded;
            }
            return node(Op::Neg, at, {inner});
        }
        return primary();
    }

    ExprPtr primary() {
        const Token t = peek();
        switch (t.kind) {
            case Tok::Number: {
                ++pos_;
                auto e = node(Op::Number, t.offset, {});
                std::const_pointer_cast<Expr>(e)->number = t.number;
                return e;
            }
            case Tok::Ident: {
                ++pos_;
                auto e = std::make_shared<Expr>();
                e->op = Op::Ident;
                e->offset = t.offset;
                e->name = t.text;
                auto it = std::find(vars_.begin(), vars_.end(), t.text);
                e->var = static_cast<std::size_t>(it - vars_.begin());
                if (it == vars_.end()) vars_.push_back(t.text);
                return e;
            }
            case Tok::LParen: {
                ++pos_;
                ExprPtr inner = expr();
                if (!accept(Tok::RParen)) throw SyntaxError("expected ')'", peek().offset);
                return inner;
            }
            case Tok::End: throw SyntaxError("unexpected end of rule", t.offset);
            default: throw SyntaxError("expected an operand", t.offset);
        }
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::vector<std::string> vars_;
};

const char* op_text(Op op) {
    switch (op) {
        case Op::Add: return "+";
        case Op::Sub: return "-";
        case Op::Mul: return "*";
        case Op::Div: return "/";
        case Op::Lt: return "<";
        case Op::Le: return "<=";
        case Op::Gt: return ">";
        case Op::Ge: return ">=";
        case Op::Eq: return "==";
        case Op::Ne: return "!=";
        case Op::And: return "and";
        case Op::Or: return "or";
        default: return "?";
    }
}

struct Value {
    double num = 0.0;
    bool truth = false;
};

Value eval_node(const Expr& e, std::span<const double> sample, const std::vector<std::size_t>& cols, bool& soft) {
    auto num = [&](std::size_t i) { return eval_node(*e.args[i], sample, cols, soft).num; };
    auto truth = [&](std::size_t i) { return eval_node(*e.args[i], sample, cols, soft).truth; };
    Value v;
    switch (e.op) {
        case Op::Number: v.num = e.number; break;
        case Op::Ident: v.num = sample[cols[e.var]]; break;
        case Op::Neg: v.num = -num(0); break;
        case Op::Add: v.num = num(0) + num(1); break;
        case Op::Sub: v.num = num(0) - num(1); break;
        case Op::Mul: v.num = num(0) * num(1); break;
        case Op::Div: {
            const double a = num(0), b = num(1);
            if (b == 0.0) {
                soft = true;
                v.num = 0.0;
            } else {
                v.num = a / b;
            }
            break;
        }
        case Op::Lt: v.truth = num(0) < num(1); break;
        case Op::Le: v.truth = num(0) <= num(1); break;
        case Op::Gt: v.truth = num(0) > num(1); break;
        case Op::Ge: v.truth = num(0) >= num(1); break;
        case Op::Eq: v.truth = num(0) == num(1); break;
        case Op::Ne: v.truth = num(0) != num(1); break;
        // Both sides are always evaluated so a division by zero anywhere in
        // the rule is observed.
        case Op::And: {
            const bool a = truth(0), b = truth(1);
            v.truth = a && b;
            break;
        }
        case Op::Or: {
            const bool a = truth(0), b = truth(1);
            v.truth = a || b;
            break;
        }
        case Op::Not: v.truth = !truth(0); break;
    }
    if (!e.is_boolean() && !std::isfinite(v.num)) soft = true;
    return v;
}

}  // namespace

bool Expr::is_boolean() const {
    switch (op) {
        case Op::Lt:
        case Op::Le:
        case Op::Gt:
        case Op::Ge:
        case Op::Eq:
        case Op::Ne:
        case Op::And:
        case Op::Or:
        case Op::Not: return true;
        default: return false;
    }
}

bool equal(const Expr& a, const Expr& b) {
    if (a.op != b.op || a.args.size() != b.args.size()) return false;
    if (a.op == Op::Number && a.number != b.number) return false;
    if (a.op == Op::Ident && a.name != b.name) return false;
    for (std::size_t i = 0; i < a.args.size(); ++i)
        if (!equal(*a.args[i], *b.args[i])) return false;
    return true;
}

ParsedRule parse(std::string_view src) { return Parser(src).run(); }

std::string print(const Expr& e) {
    switch (e.op) {
        case Op::Number: return format_number(e.number);
        case Op::Ident: return e.name;
        case Op::Neg: return "(-" + print(*e.args[0]) + ")";
        case Op::Not: return "(not " + print(*e.args[0]) + ")";
        default: return "(" + print(*e.args[0]) + " " + op_text(e.op) + " " + print(*e.args[1]) + ")";
    }
}

BoundRule::BoundRule(ParsedRule rule, const std::vector<std::string>& columns) : rule_(std::move(rule)) {
    for (const auto& v : rule_.vars) {
        auto it = std::find(columns.begin(), columns.end(), v);
        if (it == columns.end()) throw ConfigError("unknown identifier '" + v + "'");
        columns_.push_back(static_cast<std::size_t>(it - columns.begin()));
    }
}

bool BoundRule::eval(std::span<const double> sample, bool& soft) const {
    soft = false;
    const bool r = eval_node(*rule_.root, sample, columns_, soft).truth;
    return r && !soft;
}

bool BoundRule::eval(std::span<const double> sample) const {
    bool soft = false;
    return eval(sample, soft);
}

}  // namespace whatif::dsl
