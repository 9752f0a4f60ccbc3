#pragma once

#include "ovita/core/error.hpp"
#include "ovita/policy/ast.hpp"

#include <string>
#include <string_view>

namespace ovita::policy {

class SyntaxError : public Error {
public:
    SyntaxError(int line, int column, std::string expected)
        : Error("syntax_error", "line " + std::to_string(line) + ", column " + std::to_string(column) +
                                    ": expected " + expected),
          line_(line),
          column_(column),
          expected_(std::move(expected)) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }
    const std::string& expected() const noexcept { return expected_; }

private:
    int line_;
    int column_;
    std::string expected_;
};

/// Source uses a keyword or callee outside the sandbox grammar (import, def, open, unknown functions, ...).
class DisallowedConstruct : public Error {
public:
    DisallowedConstruct(std::string name, int line, int column)
        : Error("disallowed_construct", "'" + name + "' is not allowed (line " + std::to_string(line) +
                                            ", column " + std::to_string(column) + ")"),
          name_(std::move(name)),
          line_(line),
          column_(column) {}

    const std::string& name() const noexcept { return name_; }
    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    std::string name_;
    int line_;
    int column_;
};

/// Maximum nesting of expressions and blocks accepted by the parser.
inline constexpr int kMaxNestingDepth = 200;

PolicyProgram parse(std::string_view source);

/// Canonical text: one statement per line, 4-space indent, fully parenthesized
/// operators, shortest round-trip number literals.
std::string print(const Block& program);
std::string print(const Expr& expr);

}  // namespace ovita::policy
