#pragma once

#include <gencrit/types.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <string_view>
#include <utility>

namespace gencrit {

struct SyntaxError : Error {
    std::size_t offset;
    SyntaxError(std::size_t off, const std::string& what_arg)
        : Error("syntax error at offset " + std::to_string(off) + ": " + what_arg), offset(off) {}
};

struct UnknownIdentifier : Error {
    std::size_t offset;
    UnknownIdentifier(std::size_t off, const std::string& name)
        : Error("unknown identifier '" + name + "' at offset " + std::to_string(off)),
          offset(off) {}
};

struct VariableOutOfRange : Error {
    std::size_t offset;
    VariableOutOfRange(std::size_t off, int index, int dim)
        : Error("variable x" + std::to_string(index) + " at offset " + std::to_string(off) +
                " exceeds declared dimension " + std::to_string(dim)),
          offset(off) {}
};

namespace detail {

enum class NodeKind {
    Literal,
    Variable,  // 0-based index
    Negate,
    Add,
    Sub,
    Mul,
    Div,
    Pow,  // exponent subtree is variable-free
    Sin,
    Cos,
    Exp,
    Sqrt,
    Log,
};

struct ExprNode {
    NodeKind kind;
    double literal = 0.0;
    int var = -1;
    std::shared_ptr<const ExprNode> a;
    std::shared_ptr<const ExprNode> b;
};

using NodePtr = std::shared_ptr<const ExprNode>;

inline NodePtr make_literal(double v) {
    auto n = std::make_shared<ExprNode>();
    n->kind = NodeKind::Literal;
    n->literal = v;
    return n;
}

inline NodePtr make_var(int idx) {
    auto n = std::make_shared<ExprNode>();
    n->kind = NodeKind::Variable;
    n->var = idx;
    return n;
}

inline NodePtr make_unary(NodeKind k, NodePtr child) {
    auto n = std::make_shared<ExprNode>();
    n->kind = k;
    n->a = std::move(child);
    return n;
}

inline NodePtr make_binary(NodeKind k, NodePtr lhs, NodePtr rhs) {
    auto n = std::make_shared<ExprNode>();
    n->kind = k;
    n->a = std::move(lhs);
    n->b = std::move(rhs);
    return n;
}

inline bool contains_variable(const ExprNode* n) {
    if (!n) return false;
    if (n->kind == NodeKind::Variable) return true;
    return contains_variable(n->a.get()) || contains_variable(n->b.get());
}

}  // namespace detail

/// Scalar value together with its partial derivatives; the forward-mode
/// carrier for eval-with-gradient.
struct DualVec {
    double value = 0.0;
    Vec partials;
};

/// Immutable arithmetic expression over variables x1..xn, pi, + - * / ^ and
/// sin cos exp sqrt log. Built by parse(); evaluation and forward-mode
/// differentiation below.
class Expr {
public:
    Expr() = default;
    Expr(detail::NodePtr root, int dim) : root_(std::move(root)), dim_(dim) {}

    int dim() const { return dim_; }
    const detail::ExprNode* root() const { return root_.get(); }
    bool valid() const { return root_ != nullptr; }

private:
    detail::NodePtr root_;
    int dim_ = 0;
};

namespace detail {

// Recursive-descent parser. Precedence, tightest first:
//   ^ (right-assoc), unary -, * /, + -
class Parser {
public:
    Parser(std::string_view src, int dim) : src_(src), dim_(dim) {}

    NodePtr parse_all() {
        NodePtr e = parse_sum();
        skip_ws();
        if (pos_ != src_.size()) throw SyntaxError(pos_, "expected operator or end of input");
        return e;
    }

private:
    std::string_view src_;
    int dim_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < src_.size() ? src_[pos_] : '\0';
    }

    NodePtr parse_sum() {
        NodePtr lhs = parse_term();
        for (;;) {
            if (eat('+'))
                lhs = make_binary(NodeKind::Add, lhs, parse_term());
            else if (eat('-'))
                lhs = make_binary(NodeKind::Sub, lhs, parse_term());
            else
                return lhs;
        }
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_unary();
        for (;;) {
            if (eat('*'))
                lhs = make_binary(NodeKind::Mul, lhs, parse_unary());
            else if (eat('/'))
                lhs = make_binary(NodeKind::Div, lhs, parse_unary());
            else
                return lhs;
        }
    }

    NodePtr parse_unary() {
        if (eat('-')) return make_unary(NodeKind::Negate, parse_unary());
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_primary();
        skip_ws();
        const std::size_t caret = pos_;
        if (eat('^')) {
            NodePtr expo = parse_unary();  // right-associative, binds tighter than unary -
            if (contains_variable(expo.get()))
                throw SyntaxError(caret, "exponent must be a constant expression");
            return make_binary(NodeKind::Pow, base, expo);
        }
        return base;
    }

    NodePtr parse_primary() {
        skip_ws();
        if (pos_ >= src_.size()) throw SyntaxError(pos_, "expected expression");
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            NodePtr e = parse_sum();
            if (!eat(')')) throw SyntaxError(pos_, "expected ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        throw SyntaxError(pos_, "expected number, variable, function or '('");
    }

    NodePtr parse_number() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
            ++pos_;
        // exponent part: 1e-3, 2.5E+4
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t mark = pos_;
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
                    ++pos_;
            } else {
                pos_ = mark;  // the 'e' belongs to an identifier or is stray
            }
        }
        const std::string text(src_.substr(start, pos_ - start));
        try {
            std::size_t used = 0;
            double v = std::stod(text, &used);
            if (used != text.size()) throw std::invalid_argument(text);
            return make_literal(v);
        } catch (const std::exception&) {
            throw SyntaxError(start, "malformed number '" + text + "'");
        }
    }

    NodePtr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                                      src_[pos_] == '_'))
            ++pos_;
        const std::string name(src_.substr(start, pos_ - start));
        if (name == "pi") return make_literal(EIGEN_PI);
        if (name == "sin" || name == "cos" || name == "exp" || name == "sqrt" || name == "log") {
            if (!eat('(')) throw SyntaxError(pos_, "expected '(' after function name");
            NodePtr arg = parse_sum();
            if (!eat(')')) throw SyntaxError(pos_, "expected ')'");
            NodeKind k = name == "sin"   ? NodeKind::Sin
                         : name == "cos" ? NodeKind::Cos
                         : name == "exp" ? NodeKind::Exp
                         : name == "sqrt" ? NodeKind::Sqrt
                                          : NodeKind::Log;
            return make_unary(k, arg);
        }
        if (name.size() >= 2 && name[0] == 'x') {
            bool digits = true;
            for (std::size_t i = 1; i < name.size(); ++i)
                if (!std::isdigit(static_cast<unsigned char>(name[i]))) digits = false;
            if (digits) {
                long idx = 0;
                try {
                    idx = std::stol(name.substr(1));
                } catch (const std::exception&) {
                    idx = -1;
                }
                if (idx < 1 || idx > dim_)
                    throw VariableOutOfRange(start, static_cast<int>(std::min<long>(idx, 1 << 30)),
                                             dim_);
                return make_var(static_cast<int>(idx) - 1);
            }
        }
        throw UnknownIdentifier(start, name);
    }
};

inline double eval_node(const ExprNode* n, const Vec& x) {
    switch (n->kind) {
        case NodeKind::Literal: return n->literal;
        case NodeKind::Variable: return x(n->var);
        case NodeKind::Negate: return -eval_node(n->a.get(), x);
        case NodeKind::Add: return eval_node(n->a.get(), x) + eval_node(n->b.get(), x);
        case NodeKind::Sub: return eval_node(n->a.get(), x) - eval_node(n->b.get(), x);
        case NodeKind::Mul: return eval_node(n->a.get(), x) * eval_node(n->b.get(), x);
        case NodeKind::Div: return eval_node(n->a.get(), x) / eval_node(n->b.get(), x);
        case NodeKind::Pow: {
            const double base = eval_node(n->a.get(), x);
            const double expo = eval_node(n->b.get(), x);
            const bool integral = expo == std::floor(expo);
            if (!integral && base <= 0.0)
                throw DomainError("pow: non-integer exponent with non-positive base");
            return std::pow(base, expo);
        }
        case NodeKind::Sin: return std::sin(eval_node(n->a.get(), x));
        case NodeKind::Cos: return std::cos(eval_node(n->a.get(), x));
        case NodeKind::Exp: return std::exp(eval_node(n->a.get(), x));
        case NodeKind::Sqrt: {
            const double v = eval_node(n->a.get(), x);
            if (v < 0.0) throw DomainError("sqrt of negative value");
            return std::sqrt(v);
        }
        case NodeKind::Log: {
            const double v = eval_node(n->a.get(), x);
            if (v <= 0.0) throw DomainError("log of non-positive value");
            return std::log(v);
        }
    }
    throw Error("eval: corrupt expression node");
}

struct Dual {
    double v;
    Vec d;
};

inline Dual eval_dual(const ExprNode* n, const Vec& x) {
    const Index dim = x.size();
    switch (n->kind) {
        case NodeKind::Literal: return {n->literal, Vec::Zero(dim)};
        case NodeKind::Variable: {
            Vec d = Vec::Zero(dim);
            d(n->var) = 1.0;
            return {x(n->var), std::move(d)};
        }
        case NodeKind::Negate: {
            Dual a = eval_dual(n->a.get(), x);
            return {-a.v, -a.d};
        }
        case NodeKind::Add: {
            Dual a = eval_dual(n->a.get(), x), b = eval_dual(n->b.get(), x);
            return {a.v + b.v, a.d + b.d};
        }
        case NodeKind::Sub: {
            Dual a = eval_dual(n->a.get(), x), b = eval_dual(n->b.get(), x);
            return {a.v - b.v, a.d - b.d};
        }
        case NodeKind::Mul: {
            Dual a = eval_dual(n->a.get(), x), b = eval_dual(n->b.get(), x);
            return {a.v * b.v, a.v * b.d + b.v * a.d};
        }
        case NodeKind::Div: {
            Dual a = eval_dual(n->a.get(), x), b = eval_dual(n->b.get(), x);
            return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
        }
        case NodeKind::Pow: {
            Dual a = eval_dual(n->a.get(), x);
            const double c = eval_node(n->b.get(), x);  // constant by construction
            const bool integral = c == std::floor(c);
            if (!integral && a.v <= 0.0)
                throw DomainError("pow: non-integer exponent with non-positive base");
            const double value = std::pow(a.v, c);
            double slope;
            if (c == 0.0)
                slope = 0.0;
            else if (integral && a.v == 0.0)
                slope = c == 1.0 ? 1.0 : 0.0;
            else
                slope = c * std::pow(a.v, c - 1.0);
            return {value, slope * a.d};
        }
        case NodeKind::Sin: {
            Dual a = eval_dual(n->a.get(), x);
            return {std::sin(a.v), std::cos(a.v) * a.d};
        }
        case NodeKind::Cos: {
            Dual a = eval_dual(n->a.get(), x);
            return {std::cos(a.v), -std::sin(a.v) * a.d};
        }
        case NodeKind::Exp: {
            Dual a = eval_dual(n->a.get(), x);
            const double e = std::exp(a.v);
            return {e, e * a.d};
        }
        case NodeKind::Sqrt: {
            Dual a = eval_dual(n->a.get(), x);
            if (a.v < 0.0) throw DomainError("sqrt of negative value");
            const double s = std::sqrt(a.v);
            return {s, a.d / (2.0 * s)};
        }
        case NodeKind::Log: {
            Dual a = eval_dual(n->a.get(), x);
            if (a.v <= 0.0) throw DomainError("log of non-positive value");
            return {std::log(a.v), a.d / a.v};
        }
    }
    throw Error("eval_dual: corrupt expression node");
}

inline int precedence(NodeKind k) {
    switch (k) {
        case NodeKind::Add:
        case NodeKind::Sub: return 1;
        case NodeKind::Mul:
        case NodeKind::Div: return 2;
        case NodeKind::Negate: return 3;
        case NodeKind::Pow: return 4;
        default: return 5;
    }
}

inline void print_node(const ExprNode* n, std::string& out) {
    const auto child = [&](const ExprNode* c, bool needs_parens) {
        if (needs_parens) out += '(';
        print_node(c, out);
        if (needs_parens) out += ')';
    };
    switch (n->kind) {
        case NodeKind::Literal: {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", n->literal);
            if (n->literal < 0.0) {
                out += '(';
                out += buf;
                out += ')';
            } else {
                out += buf;
            }
            return;
        }
        case NodeKind::Variable: out += "x" + std::to_string(n->var + 1); return;
        case NodeKind::Negate:
            out += '-';
            child(n->a.get(), precedence(n->a->kind) < precedence(NodeKind::Negate));
            return;
        case NodeKind::Add:
        case NodeKind::Sub: {
            child(n->a.get(), precedence(n->a->kind) < 1);
            out += n->kind == NodeKind::Add ? " + " : " - ";
            child(n->b.get(), precedence(n->b->kind) <= 1);
            return;
        }
        case NodeKind::Mul:
        case NodeKind::Div: {
            child(n->a.get(), precedence(n->a->kind) < 2);
            out += n->kind == NodeKind::Mul ? "*" : "/";
            child(n->b.get(), precedence(n->b->kind) <= 2);
            return;
        }
        case NodeKind::Pow: {
            child(n->a.get(), precedence(n->a->kind) < 5);  // parenthesize any compound base
            out += '^';
            child(n->b.get(), precedence(n->b->kind) < 5);
            return;
        }
        case NodeKind::Sin: out += "sin("; break;
        case NodeKind::Cos: out += "cos("; break;
        case NodeKind::Exp: out += "exp("; break;
        case NodeKind::Sqrt: out += "sqrt("; break;
        case NodeKind::Log: out += "log("; break;
    }
    print_node(n->a.get(), out);
    out += ')';
}

}  // namespace detail

/// Parse `src` over variables x1..xn. Errors carry byte offsets into src.
inline Expr parse(std::string_view src, int n) {
    detail::Parser p(src, n);
    return Expr(p.parse_all(), n);
}

inline double eval(const Expr& e, const Vec& x) {
    if (x.size() != e.dim()) throw Error("eval: point dimension mismatch");
    return detail::eval_node(e.root(), x);
}

/// Exact forward-mode gradient of e at x.
inline Vec grad(const Expr& e, const Vec& x) {
    if (x.size() != e.dim()) throw Error("grad: point dimension mismatch");
    return detail::eval_dual(e.root(), x).d;
}

/// Value and gradient in one pass.
inline DualVec eval_with_grad(const Expr& e, const Vec& x) {
    if (x.size() != e.dim()) throw Error("eval_with_grad: point dimension mismatch");
    detail::Dual d = detail::eval_dual(e.root(), x);
    return {d.v, std::move(d.d)};
}

/// Round-trippable text form: parse(print(e), n) reproduces e.
inline std::string print(const Expr& e) {
    std::string out;
    detail::print_node(e.root(), out);
    return out;
}

}  // namespace gencrit
