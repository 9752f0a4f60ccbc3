#include "ovita/policy/parser.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace ovita::policy {

namespace {

const char* op_text(BinaryOp op) {
    switch (op) {
        case BinaryOp::Add: return "+";
        case BinaryOp::Sub: return "-";
        case BinaryOp::Mul: return "*";
        case BinaryOp::Div: return "/";
        case BinaryOp::Mod: return "%";
        case BinaryOp::Eq: return "==";
        case BinaryOp::Ne: return "!=";
        case BinaryOp::Lt: return "<";
        case BinaryOp::Le: return "<=";
        case BinaryOp::Gt: return ">";
        case BinaryOp::Ge: return ">=";
        case BinaryOp::And: return "&&";
        case BinaryOp::Or: return "||";
    }
    return "?";
}

void number(std::string& out, double v) {
    std::array<char, 32> buf{};
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    out.append(buf.data(), r.ptr);
}

void quoted(std::string& out, const std::string& s) {
    out += '"';
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    out += '"';
}

void expr(std::string& out, const Expr& e);

// Wrap postfix targets that would otherwise lex differently ("5.x") or bind looser.
void postfix_target(std::string& out, const Expr& e) {
    const bool wrap = std::holds_alternative<NumberLit>(e.node);
    if (wrap) out += '(';
    expr(out, e);
    if (wrap) out += ')';
}

void expr(std::string& out, const Expr& e) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, NumberLit>) {
                if (n.value < 0.0 || (n.value == 0.0 && std::signbit(n.value))) {
                    out += "(-";
                    number(out, -n.value);
                    out += ')';
                } else {
                    number(out, n.value);
                }
            } else if constexpr (std::is_same_v<T, StringLit>) {
                quoted(out, n.value);
            } else if constexpr (std::is_same_v<T, BoolLit>) {
                out += n.value ? "true" : "false";
            } else if constexpr (std::is_same_v<T, VarRef>) {
                out += n.name;
            } else if constexpr (std::is_same_v<T, ListLit>) {
                out += '[';
                for (std::size_t i = 0; i < n.items.size(); ++i) {
                    if (i) out += ", ";
                    expr(out, n.items[i]);
                }
                out += ']';
            } else if constexpr (std::is_same_v<T, Unary>) {
                out += n.op == UnaryOp::Negate ? "(-" : "(!";
                expr(out, *n.operand);
                out += ')';
            } else if constexpr (std::is_same_v<T, Binary>) {
                out += '(';
                expr(out, *n.lhs);
                out += ' ';
                out += op_text(n.op);
                out += ' ';
                expr(out, *n.rhs);
                out += ')';
            } else if constexpr (std::is_same_v<T, Call>) {
                out += n.callee;
                out += '(';
                for (std::size_t i = 0; i < n.args.size(); ++i) {
                    if (i) out += ", ";
                    if (n.args[i].name) {
                        out += *n.args[i].name;
                        out += '=';
                    }
                    expr(out, *n.args[i].value);
                }
                out += ')';
            } else if constexpr (std::is_same_v<T, Index>) {
                postfix_target(out, *n.target);
                out += '[';
                expr(out, *n.index);
                out += ']';
            } else if constexpr (std::is_same_v<T, Field>) {
                postfix_target(out, *n.target);
                out += '.';
                out += n.name;
            }
        },
        e.node);
}

void block(std::string& out, const Block& b, int indent);

void stmt(std::string& out, const Stmt& s, int indent) {
    out.append(static_cast<std::size_t>(indent) * 4, ' ');
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, LetStmt>) {
                out += "let " + n.name + " = ";
                expr(out, n.value);
                out += ";\n";
            } else if constexpr (std::is_same_v<T, AssignStmt>) {
                out += n.name;
                if (n.index) {
                    out += '[';
                    expr(out, *n.index);
                    out += ']';
                }
                out += " = ";
                expr(out, n.value);
                out += ";\n";
            } else if constexpr (std::is_same_v<T, ForStmt>) {
                out += "for " + n.var + " in range(";
                expr(out, n.start);
                out += ", ";
                expr(out, n.end);
                if (n.step) {
                    out += ", ";
                    expr(out, *n.step);
                }
                out += ") {\n";
                block(out, n.body, indent + 1);
                out.append(static_cast<std::size_t>(indent) * 4, ' ');
                out += "}\n";
            } else if constexpr (std::is_same_v<T, IfStmt>) {
                out += "if ";
                expr(out, n.condition);
                out += " {\n";
                block(out, n.then_body, indent + 1);
                out.append(static_cast<std::size_t>(indent) * 4, ' ');
                if (n.else_body.empty()) {
                    out += "}\n";
                } else {
                    out += "} else {\n";
                    block(out, n.else_body, indent + 1);
                    out.append(static_cast<std::size_t>(indent) * 4, ' ');
                    out += "}\n";
                }
            } else if constexpr (std::is_same_v<T, ExprStmt>) {
                expr(out, n.expr);
                out += ";\n";
            }
        },
        s.node);
}

void block(std::string& out, const Block& b, int indent) {
    for (const Stmt& s : b) stmt(out, s, indent);
}

}  // namespace

std::string print(const Block& program) {
    std::string out;
    block(out, program, 0);
    return out;
}

std::string print(const Expr& e) {
    std::string out;
    expr(out, e);
    return out;
}

}  // namespace ovita::policy
