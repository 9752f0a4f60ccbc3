#pragma once

#include "ovita/core/error.hpp"
#include "ovita/core/model.hpp"
#include "ovita/policy/ast.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace ovita::policy {

inline constexpr std::size_t kDefaultStepBudget = 1'000'000;
inline constexpr std::size_t kMaxOutputWaypoints = 100'000;
inline constexpr std::size_t kMaxListLength = 1'000'000;

enum class RuntimeErrorKind {
    DivisionByZero,
    UnknownObjectLabel,
    IndexOutOfRange,
    TypeError,
    InvalidArgument,
    UndefinedVariable,
    NonFinite,
    OutputTooLarge,
};

std::string to_string(RuntimeErrorKind k);

class RuntimeError : public Error {
public:
    RuntimeError(RuntimeErrorKind kind, SourcePos at, const std::string& detail)
        : Error("runtime_error", to_string(kind) + " at line " + std::to_string(at.line) + ", column " +
                                     std::to_string(at.column) + ": " + detail),
          kind_(kind),
          at_(at) {}

    RuntimeErrorKind kind() const noexcept { return kind_; }
    SourcePos location() const noexcept { return at_; }

private:
    RuntimeErrorKind kind_;
    SourcePos at_;
};

class BudgetExceeded : public Error {
public:
    explicit BudgetExceeded(std::size_t budget)
        : Error("budget_exceeded", "program exceeded its budget of " + std::to_string(budget) + " steps"),
          budget_(budget) {}

    std::size_t budget() const noexcept { return budget_; }

private:
    std::size_t budget_;
};

struct TraceEntry {
    std::size_t step;
    std::string description;
};

struct PolicyResult {
    Trajectory trajectory;
    std::vector<TraceEntry> trace;
    std::size_t steps_used = 0;
};

/// Runs `program` against a private copy of `input`. Deterministic; the only
/// ambient data are `input` (get_trajectory) and `scene` (detect_objects).
/// Every statement, expression node, and loop iteration costs one step;
/// builtins that touch the whole trajectory or a list cost its length.
PolicyResult execute(const PolicyProgram& program, const Trajectory& input, const Scene& scene,
                     std::size_t budget = kDefaultStepBudget);

}  // namespace ovita::policy
