#include "ovita/policy/parser.hpp"

#include "lexer.hpp"
#include "ovita/policy/catalog.hpp"

#include <array>
#include <charconv>

namespace ovita::policy {

std::string to_string(const ParamValue& v) {
    if (const auto* d = std::get_if<double>(&v)) {
        std::array<char, 32> buf{};
        const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), *d);
        return std::string(buf.data(), r.ptr);
    }
    if (const auto* s = std::get_if<std::string>(&v)) return print(Expr{StringLit{*s}, {}});
    return std::get<bool>(v) ? "true" : "false";
}

namespace {

using detail::Tok;
using detail::Token;

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : t_(std::move(toks)) {}

    Block program() {
        Block out;
        for (;;) {
            skip_semicolons();
            if (peek().kind == Tok::End) return out;
            out.push_back(statement());
        }
    }

private:
    struct DepthGuard {
        explicit DepthGuard(Parser& p) : p(p) {
            if (++p.depth_ > kMaxNestingDepth) {
                const auto& at = p.peek().pos;
                throw SyntaxError(at.line, at.column, "shallower nesting (limit " +
                                                          std::to_string(kMaxNestingDepth) + ")");
            }
        }
        ~DepthGuard() { --p.depth_; }
        Parser& p;
    };

    const Token& peek(std::size_t k = 0) const {
        const std::size_t j = std::min(i_ + k, t_.size() - 1);
        return t_[j];
    }
    const Token& take() {
        const Token& tok = t_[i_];
        if (i_ + 1 < t_.size()) ++i_;
        return tok;
    }
    bool is_punct(std::string_view p) const { return peek().kind == Tok::Punct && peek().text == p; }
    bool is_keyword(std::string_view k) const { return peek().kind == Tok::Keyword && peek().text == k; }

    [[noreturn]] void fail(const std::string& expected) const {
        throw SyntaxError(peek().pos.line, peek().pos.column, expected);
    }
    void expect_punct(std::string_view p) {
        if (!is_punct(p)) fail("'" + std::string(p) + "'");
        take();
    }
    std::string expect_ident(const char* what) {
        if (peek().kind != Tok::Ident) fail(what);
        return take().text;
    }
    void skip_semicolons() {
        while (is_punct(";")) take();
    }

    Stmt statement() {
        const SourcePos at = peek().pos;
        if (is_keyword("let")) {
            take();
            std::string name = expect_ident("variable name");
            expect_punct("=");
            Expr value = expr();
            expect_punct(";");
            return {LetStmt{std::move(name), std::move(value)}, at};
        }
        if (is_keyword("for")) return for_stmt();
        if (is_keyword("if")) return if_stmt();

        Expr e = expr();
        if (is_punct("=")) {
            take();
            Expr value = expr();
            expect_punct(";");
            if (const auto* v = std::get_if<VarRef>(&e.node)) {
                return {AssignStmt{v->name, std::nullopt, std::move(value)}, at};
            }
            if (const auto* ix = std::get_if<Index>(&e.node)) {
                if (const auto* base = std::get_if<VarRef>(&ix->target->node)) {
                    return {AssignStmt{base->name, *ix->index, std::move(value)}, at};
                }
            }
            throw SyntaxError(at.line, at.column, "assignable target (name or name[index])");
        }
        expect_punct(";");
        return {ExprStmt{std::move(e)}, at};
    }

    Stmt for_stmt() {
        DepthGuard g(*this);
        const SourcePos at = take().pos;
        std::string var = expect_ident("loop variable");
        if (!is_keyword("in")) fail("'in'");
        take();
        if (peek().kind != Tok::Ident || peek().text != "range") fail("'range'");
        take();
        expect_punct("(");
        std::vector<Expr> bounds;
        bounds.push_back(expr());
        while (is_punct(",") && bounds.size() < 3) {
            take();
            bounds.push_back(expr());
        }
        expect_punct(")");
        ForStmt f{std::move(var), Expr{NumberLit{0.0}, at}, Expr{NumberLit{0.0}, at}, std::nullopt, {}};
        if (bounds.size() == 1) {
            f.end = std::move(bounds[0]);
        } else {
            f.start = std::move(bounds[0]);
            f.end = std::move(bounds[1]);
            if (bounds.size() == 3) f.step = std::move(bounds[2]);
        }
        f.body = block();
        return {std::move(f), at};
    }

    Stmt if_stmt() {
        DepthGuard g(*this);
        const SourcePos at = take().pos;
        Expr cond = expr();
        Block then_body = block();
        Block else_body;
        if (is_keyword("else")) {
            take();
            if (is_keyword("if")) {
                else_body.push_back(if_stmt());
            } else {
                else_body = block();
            }
        }
        return {IfStmt{std::move(cond), std::move(then_body), std::move(else_body)}, at};
    }

    Block block() {
        DepthGuard g(*this);
        expect_punct("{");
        Block out;
        for (;;) {
            skip_semicolons();
            if (is_punct("}")) break;
            if (peek().kind == Tok::End) fail("'}'");
            out.push_back(statement());
        }
        take();
        return out;
    }

    Expr expr() {
        DepthGuard g(*this);
        return or_expr();
    }

    // Each extra link of a left-associative chain nests the tree one level deeper.
    template <class Next>
    Expr chain(Next next, std::initializer_list<std::pair<std::string_view, BinaryOp>> ops) {
        Expr lhs = (this->*next)();
        int links = 0;
        for (;;) {
            const BinaryOp* op = nullptr;
            for (const auto& [text, o] : ops) {
                if ((peek().kind == Tok::Punct || peek().kind == Tok::Keyword) && peek().text == text) op = &o;
            }
            if (op == nullptr) break;
            const BinaryOp o = *op;
            const SourcePos at = take().pos;
            ++depth_;
            ++links;
            if (depth_ > kMaxNestingDepth) {
                depth_ -= links;
                throw SyntaxError(at.line, at.column,
                                  "shallower nesting (limit " + std::to_string(kMaxNestingDepth) + ")");
            }
            Expr rhs;
            try {
                rhs = (this->*next)();
            } catch (...) {
                depth_ -= links;
                throw;
            }
            lhs = Expr{Binary{o, std::move(lhs), std::move(rhs)}, at};
        }
        depth_ -= links;
        return lhs;
    }

    Expr or_expr() { return chain(&Parser::and_expr, {{"||", BinaryOp::Or}, {"or", BinaryOp::Or}}); }
    Expr and_expr() { return chain(&Parser::cmp_expr, {{"&&", BinaryOp::And}, {"and", BinaryOp::And}}); }

    Expr cmp_expr() {
        Expr lhs = sum_expr();
        static const std::pair<std::string_view, BinaryOp> ops[] = {
            {"==", BinaryOp::Eq}, {"!=", BinaryOp::Ne}, {"<", BinaryOp::Lt},
            {"<=", BinaryOp::Le}, {">", BinaryOp::Gt}, {">=", BinaryOp::Ge}};
        for (const auto& [text, op] : ops) {
            if (is_punct(text)) {
                const SourcePos at = take().pos;
                Expr rhs = sum_expr();
                return Expr{Binary{op, std::move(lhs), std::move(rhs)}, at};
            }
        }
        return lhs;
    }

    Expr sum_expr() { return chain(&Parser::product_expr, {{"+", BinaryOp::Add}, {"-", BinaryOp::Sub}}); }
    Expr product_expr() {
        return chain(&Parser::unary_expr, {{"*", BinaryOp::Mul}, {"/", BinaryOp::Div}, {"%", BinaryOp::Mod}});
    }

    Expr unary_expr() {
        if (is_punct("-") || is_punct("!") || is_keyword("not")) {
            DepthGuard g(*this);
            const Token& tok = take();
            const UnaryOp op = tok.text == "-" ? UnaryOp::Negate : UnaryOp::Not;
            const SourcePos at = tok.pos;
            Expr operand = unary_expr();
            return Expr{Unary{op, std::move(operand)}, at};
        }
        return postfix_expr();
    }

    Expr postfix_expr() {
        Expr e = primary();
        int links = 0;
        auto unwind = [&] { depth_ -= links; };
        try {
            for (;;) {
                if (!is_punct("[") && !is_punct(".")) break;
                ++depth_;
                ++links;
                if (depth_ > kMaxNestingDepth) fail("shallower nesting (limit " + std::to_string(kMaxNestingDepth) + ")");
                const bool bracket = is_punct("[");
                const SourcePos at = take().pos;
                if (bracket) {
                    Expr idx = expr();
                    expect_punct("]");
                    e = Expr{Index{std::move(e), std::move(idx)}, at};
                } else {
                    std::string name = expect_ident("field name");
                    e = Expr{Field{std::move(e), std::move(name)}, at};
                }
            }
        } catch (...) {
            unwind();
            throw;
        }
        unwind();
        return e;
    }

    Expr primary() {
        const Token& tok = peek();
        const SourcePos at = tok.pos;
        switch (tok.kind) {
            case Tok::Number: {
                const double v = take().number;
                return Expr{NumberLit{v}, at};
            }
            case Tok::String: return Expr{StringLit{take().text}, at};
            case Tok::Keyword:
                if (tok.text == "true" || tok.text == "false") {
                    const bool v = take().text == "true";
                    return Expr{BoolLit{v}, at};
                }
                fail("expression");
            case Tok::Ident: {
                std::string name = take().text;
                if (!is_punct("(")) return Expr{VarRef{std::move(name)}, at};
                if (find_builtin(name) == nullptr) throw DisallowedConstruct(name, at.line, at.column);
                take();
                Call call{std::move(name), {}};
                if (!is_punct(")")) {
                    for (;;) {
                        std::optional<std::string> arg_name;
                        if (peek().kind == Tok::Ident && peek(1).kind == Tok::Punct && peek(1).text == "=") {
                            arg_name = take().text;
                            take();
                        } else if (!call.args.empty() && call.args.back().name) {
                            fail("named argument (positional arguments must come first)");
                        }
                        Expr value = expr();
                        call.args.push_back(Arg{std::move(arg_name), std::move(value)});
                        if (!is_punct(",")) break;
                        take();
                    }
                }
                expect_punct(")");
                return Expr{std::move(call), at};
            }
            case Tok::Punct:
                if (tok.text == "(") {
                    take();
                    Expr inner = expr();
                    expect_punct(")");
                    return inner;
                }
                if (tok.text == "[") {
                    DepthGuard g(*this);
                    take();
                    ListLit list;
                    if (!is_punct("]")) {
                        for (;;) {
                            list.items.push_back(expr());
                            if (!is_punct(",")) break;
                            take();
                            if (is_punct("]")) break;
                        }
                    }
                    expect_punct("]");
                    return Expr{std::move(list), at};
                }
                fail("expression");
            case Tok::End: fail("expression");
        }
        fail("expression");
    }

    std::vector<Token> t_;
    std::size_t i_ = 0;
    int depth_ = 0;
};

std::optional<ParamValue> literal_value(const Expr& e) {
    if (const auto* n = std::get_if<NumberLit>(&e.node)) return n->value;
    if (const auto* s = std::get_if<StringLit>(&e.node)) return s->value;
    if (const auto* b = std::get_if<BoolLit>(&e.node)) return b->value;
    if (const auto* u = std::get_if<Unary>(&e.node)) {
        if (u->op == UnaryOp::Negate) {
            if (const auto* n = std::get_if<NumberLit>(&u->operand->node)) return -n->value;
        }
    }
    return std::nullopt;
}

}  // namespace

PolicyProgram parse(std::string_view source) {
    PolicyProgram p;
    p.source = std::string(source);
    p.ast = Parser(detail::lex(source)).program();
    for (const Stmt& s : p.ast) {
        if (const auto* let = std::get_if<LetStmt>(&s.node)) {
            if (auto v = literal_value(let->value)) p.params[let->name] = *v;
        }
    }
    return p;
}

}  // namespace ovita::policy
