#include "rdyn/expression.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <utility>

namespace rdyn {

namespace {

enum class Fn { Exp, Log, Sqrt, Abs, Tanh, Min, Max };

constexpr std::array<std::pair<std::string_view, Fn>, 7> kFunctions{{
    {"exp", Fn::Exp}, {"log", Fn::Log}, {"sqrt", Fn::Sqrt}, {"abs", Fn::Abs},
    {"tanh", Fn::Tanh}, {"min", Fn::Min}, {"max", Fn::Max},
}};

constexpr int arity(Fn f) { return (f == Fn::Min || f == Fn::Max) ? 2 : 1; }

constexpr std::string_view name(Fn f) {
    for (const auto& [n, fn] : kFunctions)
        if (fn == f) return n;
    return {};
}

} // namespace

struct Expression::Node {
    enum class Kind { Number, Variable, Neg, Add, Sub, Mul, Div, Pow, Call };

    Kind kind;
    double value = 0.0;  // Number
    int index = 0;       // Variable
    Fn fn = Fn::Exp;     // Call
    std::shared_ptr<const Node> a, b;
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make_number(double v) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Number;
    n->value = v;
    return n;
}

NodePtr make_variable(int i) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Variable;
    n->index = i;
    return n;
}

NodePtr make_unary(Node::Kind k, NodePtr a) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->a = std::move(a);
    return n;
}

NodePtr make_binary(Node::Kind k, NodePtr a, NodePtr b) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

NodePtr make_call(Fn f, NodePtr a, NodePtr b) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Call;
    n->fn = f;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

enum class Tok {
    Number, Ident, Plus, Minus, Star, Slash, Caret,
    LParen, RParen, Comma, LBracket, RBracket, End,
};

struct Token {
    Tok kind;
    std::size_t offset;     // byte offset into the source text
    std::string_view text;  // slice of the source
    double number = 0.0;    // valid when kind == Tok::Number
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_])))
            ++pos_;
        const std::size_t at = pos_;
        if (pos_ >= src_.size()) return {Tok::End, at, {}};

        const char c = src_[pos_];
        switch (c) {
            case '+': ++pos_; return {Tok::Plus, at, src_.substr(at, 1)};
            case '-': ++pos_; return {Tok::Minus, at, src_.substr(at, 1)};
            case '*': ++pos_; return {Tok::Star, at, src_.substr(at, 1)};
            case '/': ++pos_; return {Tok::Slash, at, src_.substr(at, 1)};
            case '^': ++pos_; return {Tok::Caret, at, src_.substr(at, 1)};
            case '(': ++pos_; return {Tok::LParen, at, src_.substr(at, 1)};
            case ')': ++pos_; return {Tok::RParen, at, src_.substr(at, 1)};
            case ',': ++pos_; return {Tok::Comma, at, src_.substr(at, 1)};
            case '[': ++pos_; return {Tok::LBracket, at, src_.substr(at, 1)};
            case ']': ++pos_; return {Tok::RBracket, at, src_.substr(at, 1)};
            default: break;
        }

        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
            return lex_number(at);
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
            return lex_ident(at);

        throw ParseError("unexpected character '" + std::string(1, c) +
                             "' at offset " + std::to_string(at),
                         at);
    }

private:
    Token lex_number(std::size_t at) {
        std::size_t end = pos_;
        while (end < src_.size() &&
               (std::isdigit(static_cast<unsigned char>(src_[end])) || src_[end] == '.'))
            ++end;
        if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
            std::size_t e = end + 1;
            if (e < src_.size() && (src_[e] == '+' || src_[e] == '-')) ++e;
            if (e < src_.size() && std::isdigit(static_cast<unsigned char>(src_[e]))) {
                ++e;
                while (e < src_.size() && std::isdigit(static_cast<unsigned char>(src_[e])))
                    ++e;
                end = e;
            }
        }
        double value = 0.0;
        const auto [ptr, ec] =
            std::from_chars(src_.data() + at, src_.data() + end, value);
        if (ec != std::errc{} || ptr != src_.data() + end)
            throw ParseError("malformed number at offset " + std::to_string(at), at);
        pos_ = end;
        return {Tok::Number, at, src_.substr(at, end - at), value};
    }

    Token lex_ident(std::size_t at) {
        std::size_t end = pos_;
        while (end < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '_'))
            ++end;
        pos_ = end;
        return {Tok::Ident, at, src_.substr(at, end - at)};
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Parser (recursive descent, one token of lookahead)
// ---------------------------------------------------------------------------

class Parser {
public:
    Parser(std::string_view src, int dimension)
        : lexer_(src), dimension_(dimension), current_(lexer_.next()) {}

    NodePtr parse() {
        NodePtr e = expr();
        expect(Tok::End, "end of input");
        return e;
    }

private:
    NodePtr expr() {
        NodePtr lhs = term();
        while (current_.kind == Tok::Plus || current_.kind == Tok::Minus) {
            const auto kind =
                current_.kind == Tok::Plus ? Node::Kind::Add : Node::Kind::Sub;
            advance();
            lhs = make_binary(kind, std::move(lhs), term());
        }
        return lhs;
    }

    NodePtr term() {
        NodePtr lhs = factor();
        while (current_.kind == Tok::Star || current_.kind == Tok::Slash) {
            const auto kind =
                current_.kind == Tok::Star ? Node::Kind::Mul : Node::Kind::Div;
            advance();
            lhs = make_binary(kind, std::move(lhs), factor());
        }
        return lhs;
    }

    NodePtr factor() {
        if (current_.kind == Tok::Minus) {
            advance();
            return make_unary(Node::Kind::Neg, factor());
        }
        return power();
    }

    NodePtr power() {
        NodePtr base = atom();
        if (current_.kind == Tok::Caret) {
            advance();
            // Right associative: the exponent is a full factor, so both
            // "x0^2^3" == x0^(2^3) and "x0^-2" parse as expected.
            return make_binary(Node::Kind::Pow, std::move(base), factor());
        }
        return base;
    }

    NodePtr atom() {
        switch (current_.kind) {
            case Tok::Number: {
                const double v = current_.number;
                advance();
                return make_number(v);
            }
            case Tok::Ident:
                return ident_atom();
            case Tok::LParen: {
                advance();
                NodePtr e = expr();
                expect(Tok::RParen, "')'");
                return e;
            }
            default:
                fail("a number, a variable, a function name, '(' or '-'");
        }
    }

    NodePtr ident_atom() {
        const Token tok = current_;
        advance();

        // x[i]
        if (tok.text == "x" && current_.kind == Tok::LBracket) {
            advance();
            if (current_.kind != Tok::Number)
                fail("a variable index");
            const Token idx = current_;
            advance();
            expect(Tok::RBracket, "']'");
            return variable_from(idx);
        }

        // x<digits>
        if (tok.text.size() > 1 && tok.text[0] == 'x') {
            bool digits = true;
            for (std::size_t i = 1; i < tok.text.size(); ++i)
                digits = digits && std::isdigit(static_cast<unsigned char>(tok.text[i]));
            if (digits) {
                Token idx = tok;
                idx.offset += 1;
                idx.text = tok.text.substr(1);
                int value = 0;
                std::from_chars(idx.text.data(), idx.text.data() + idx.text.size(), value);
                idx.number = value;
                return variable_from(idx);
            }
        }

        for (const auto& [fname, fn] : kFunctions) {
            if (tok.text == fname) {
                expect(Tok::LParen, "'('");
                NodePtr a = expr();
                NodePtr b;
                if (arity(fn) == 2) {
                    expect(Tok::Comma, "','");
                    b = expr();
                }
                expect(Tok::RParen, "')'");
                return make_call(fn, std::move(a), std::move(b));
            }
        }

        throw ParseError("unknown identifier '" + std::string(tok.text) +
                             "' at offset " + std::to_string(tok.offset),
                         tok.offset);
    }

    NodePtr variable_from(const Token& idx) {
        const double raw = idx.number;
        const int i = static_cast<int>(raw);
        if (raw != static_cast<double>(i) || i < 0)
            throw ParseError("variable index must be a non-negative integer at offset " +
                                 std::to_string(idx.offset),
                             idx.offset);
        if (i >= dimension_)
            throw IndexError("variable index " + std::to_string(i) +
                             " out of range for dimension " + std::to_string(dimension_) +
                             " at offset " + std::to_string(idx.offset));
        return make_variable(i);
    }

    void advance() { current_ = lexer_.next(); }

    void expect(Tok kind, const char* what) {
        if (current_.kind != kind) fail(what);
        if (kind != Tok::End) advance();
    }

    [[noreturn]] void fail(const char* expected) {
        const std::string got = current_.kind == Tok::End
                                    ? std::string("end of input")
                                    : "'" + std::string(current_.text) + "'";
        throw ParseError("expected " + std::string(expected) + " but found " + got +
                             " at offset " + std::to_string(current_.offset),
                         current_.offset);
    }

    Lexer lexer_;
    int dimension_;
    Token current_;
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

double eval_node(const Node& n, const Eigen::VectorXd& x, std::vector<int>* trace) {
    switch (n.kind) {
        case Node::Kind::Number:
            return n.value;
        case Node::Kind::Variable:
            return x[n.index];
        case Node::Kind::Neg:
            return -eval_node(*n.a, x, trace);
        case Node::Kind::Add:
            return eval_node(*n.a, x, trace) + eval_node(*n.b, x, trace);
        case Node::Kind::Sub:
            return eval_node(*n.a, x, trace) - eval_node(*n.b, x, trace);
        case Node::Kind::Mul:
            return eval_node(*n.a, x, trace) * eval_node(*n.b, x, trace);
        case Node::Kind::Div: {
            const double num = eval_node(*n.a, x, trace);
            const double den = eval_node(*n.b, x, trace);
            if (den == 0.0) throw NumericalError("division by zero");
            return num / den;
        }
        case Node::Kind::Pow: {
            const double base = eval_node(*n.a, x, trace);
            const double exponent = eval_node(*n.b, x, trace);
            if (base == 0.0 && exponent < 0.0)
                throw NumericalError("zero raised to a negative power");
            const double r = std::pow(base, exponent);
            if (std::isnan(r))
                throw NumericalError("invalid power (negative base with non-integer exponent)");
            return r;
        }
        case Node::Kind::Call: {
            const double a = eval_node(*n.a, x, trace);
            switch (n.fn) {
                case Fn::Exp:  return std::exp(a);
                case Fn::Log:
                    if (a <= 0.0) throw NumericalError("log of a non-positive value");
                    return std::log(a);
                case Fn::Sqrt:
                    if (a < 0.0) throw NumericalError("sqrt of a negative value");
                    return std::sqrt(a);
                case Fn::Abs:  return std::abs(a);
                case Fn::Tanh: return std::tanh(a);
                case Fn::Min: {
                    const double b = eval_node(*n.b, x, trace);
                    if (trace) trace->push_back(a <= b ? 0 : 1);
                    return a <= b ? a : b;
                }
                case Fn::Max: {
                    const double b = eval_node(*n.b, x, trace);
                    if (trace) trace->push_back(a >= b ? 0 : 1);
                    return a >= b ? a : b;
                }
            }
            break;
        }
    }
    throw NumericalError("corrupt expression tree");
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

// Precedence levels used to decide where parentheses are required so that
// reparsing reproduces the exact tree: + - (1), * / (2), unary - (3), ^ (4),
// atoms (5).
int precedence(const Node& n) {
    switch (n.kind) {
        case Node::Kind::Add:
        case Node::Kind::Sub: return 1;
        case Node::Kind::Mul:
        case Node::Kind::Div: return 2;
        case Node::Kind::Neg: return 3;
        case Node::Kind::Pow: return 4;
        default: return 5;
    }
}

void print_node(const Node& n, std::string& out);

void print_child(const Node& child, int min_precedence, std::string& out) {
    const bool parens = precedence(child) < min_precedence;
    if (parens) out += '(';
    print_node(child, out);
    if (parens) out += ')';
}

void print_node(const Node& n, std::string& out) {
    switch (n.kind) {
        case Node::Kind::Number: {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", n.value);
            out += buf;
            return;
        }
        case Node::Kind::Variable:
            out += 'x';
            out += std::to_string(n.index);
            return;
        case Node::Kind::Neg:
            out += '-';
            print_child(*n.a, 3, out);
            return;
        case Node::Kind::Add:
        case Node::Kind::Sub:
            print_child(*n.a, 1, out);
            out += n.kind == Node::Kind::Add ? " + " : " - ";
            print_child(*n.b, 2, out);
            return;
        case Node::Kind::Mul:
        case Node::Kind::Div:
            print_child(*n.a, 2, out);
            out += n.kind == Node::Kind::Mul ? "*" : "/";
            print_child(*n.b, 3, out);
            return;
        case Node::Kind::Pow:
            print_child(*n.a, 5, out);
            out += '^';
            print_child(*n.b, 3, out);
            return;
        case Node::Kind::Call:
            out += name(n.fn);
            out += '(';
            print_node(*n.a, out);
            if (n.b) {
                out += ", ";
                print_node(*n.b, out);
            }
            out += ')';
            return;
    }
}

bool contains_min_max(const Node& n) {
    if (n.kind == Node::Kind::Call && (n.fn == Fn::Min || n.fn == Fn::Max)) return true;
    if (n.a && contains_min_max(*n.a)) return true;
    if (n.b && contains_min_max(*n.b)) return true;
    return false;
}

} // namespace

Expression Expression::parse(std::string_view text, int dimension) {
    if (dimension < 1)
        throw DimensionError("expression dimension must be at least 1");
    Parser parser(text, dimension);
    return Expression(parser.parse(), dimension);
}

double Expression::evaluate(const Eigen::VectorXd& x, std::vector<int>* branch_trace) const {
    if (x.size() != dimension_)
        throw DimensionError("state has length " + std::to_string(x.size()) +
                             " but the expression expects " + std::to_string(dimension_));
    const double r = eval_node(*root_, x, branch_trace);
    if (!std::isfinite(r)) throw NumericalError("expression produced a non-finite value");
    return r;
}

std::string Expression::str() const {
    std::string out;
    print_node(*root_, out);
    return out;
}

bool Expression::has_min_max() const noexcept { return contains_min_max(*root_); }

} // namespace rdyn
