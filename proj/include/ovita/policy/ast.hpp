#pragma once

// Syntax tree of TrajScript, the sandboxed adaptation-policy language.
// Equality ignores source positions so that parse(print(ast)) == ast.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ovita::policy {

struct SourcePos {
    int line = 1;
    int column = 1;
};

/// Owning pointer with deep copy and value equality.
template <class T>
class Box {
public:
    Box(T value) : ptr_(std::make_unique<T>(std::move(value))) {}  // NOLINT: implicit by design of the AST
    Box(const Box& other) : ptr_(std::make_unique<T>(*other.ptr_)) {}
    Box(Box&&) noexcept = default;
    Box& operator=(const Box& other) {
        if (this != &other) ptr_ = std::make_unique<T>(*other.ptr_);
        return *this;
    }
    Box& operator=(Box&&) noexcept = default;

    const T& operator*() const { return *ptr_; }
    const T* operator->() const { return ptr_.get(); }

    friend bool operator==(const Box& a, const Box& b) { return *a.ptr_ == *b.ptr_; }

private:
    std::unique_ptr<T> ptr_;
};

enum class UnaryOp { Negate, Not };
enum class BinaryOp { Add, Sub, Mul, Div, Mod, Eq, Ne, Lt, Le, Gt, Ge, And, Or };

struct Expr;

struct NumberLit {
    double value;
    bool operator==(const NumberLit&) const = default;
};
struct StringLit {
    std::string value;
    bool operator==(const StringLit&) const = default;
};
struct BoolLit {
    bool value;
    bool operator==(const BoolLit&) const = default;
};
struct VarRef {
    std::string name;
    bool operator==(const VarRef&) const = default;
};
struct ListLit {
    std::vector<Expr> items;
    bool operator==(const ListLit&) const;
};
struct Unary {
    UnaryOp op;
    Box<Expr> operand;
    bool operator==(const Unary&) const;
};
struct Binary {
    BinaryOp op;
    Box<Expr> lhs;
    Box<Expr> rhs;
    bool operator==(const Binary&) const;
};
struct Arg {
    std::optional<std::string> name;
    Box<Expr> value;
    bool operator==(const Arg&) const;
};
struct Call {
    std::string callee;
    std::vector<Arg> args;
    bool operator==(const Call&) const;
};
struct Index {
    Box<Expr> target;
    Box<Expr> index;
    bool operator==(const Index&) const;
};
struct Field {
    Box<Expr> target;
    std::string name;
    bool operator==(const Field&) const;
};

struct Expr {
    std::variant<NumberLit, StringLit, BoolLit, VarRef, ListLit, Unary, Binary, Call, Index, Field> node;
    SourcePos pos;

    bool operator==(const Expr& other) const { return node == other.node; }
};

struct Stmt;
using Block = std::vector<Stmt>;

struct LetStmt {
    std::string name;
    Expr value;
    bool operator==(const LetStmt&) const = default;
};
/// `name = value;` or `name[index] = value;`
struct AssignStmt {
    std::string name;
    std::optional<Expr> index;
    Expr value;
    bool operator==(const AssignStmt&) const = default;
};
/// `for var in range(start, end, step) { ... }`; step defaults to 1.
struct ForStmt {
    std::string var;
    Expr start;
    Expr end;
    std::optional<Expr> step;
    Block body;
    bool operator==(const ForStmt&) const;
};
struct IfStmt {
    Expr condition;
    Block then_body;
    Block else_body;
    bool operator==(const IfStmt&) const;
};
struct ExprStmt {
    Expr expr;
    bool operator==(const ExprStmt&) const = default;
};

struct Stmt {
    std::variant<LetStmt, AssignStmt, ForStmt, IfStmt, ExprStmt> node;
    SourcePos pos;

    bool operator==(const Stmt& other) const { return node == other.node; }
};

inline bool ListLit::operator==(const ListLit& o) const { return items == o.items; }
inline bool Unary::operator==(const Unary& o) const { return op == o.op && operand == o.operand; }
inline bool Binary::operator==(const Binary& o) const { return op == o.op && lhs == o.lhs && rhs == o.rhs; }
inline bool Arg::operator==(const Arg& o) const { return name == o.name && value == o.value; }
inline bool Call::operator==(const Call& o) const { return callee == o.callee && args == o.args; }
inline bool Index::operator==(const Index& o) const { return target == o.target && index == o.index; }
inline bool Field::operator==(const Field& o) const { return target == o.target && name == o.name; }
inline bool ForStmt::operator==(const ForStmt& o) const {
    return var == o.var && start == o.start && end == o.end && step == o.step && body == o.body;
}
inline bool IfStmt::operator==(const IfStmt& o) const {
    return condition == o.condition && then_body == o.then_body && else_body == o.else_body;
}

using ParamValue = std::variant<double, std::string, bool>;

struct PolicyProgram {
    std::string source;
    Block ast;
    /// Top-level `let` bindings whose right-hand side is a literal.
    std::map<std::string, ParamValue> params;
};

std::string to_string(const ParamValue& v);

}  // namespace ovita::policy
