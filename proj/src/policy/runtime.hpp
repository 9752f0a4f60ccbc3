#pragma once

#include "ovita/core/model.hpp"
#include "ovita/policy/catalog.hpp"
#include "ovita/policy/interpreter.hpp"

#include <algorithm>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ovita::policy::detail {

struct ObjectRef {
    std::size_t index;
    bool operator==(const ObjectRef&) const = default;
};

struct Value;
using List = std::vector<Value>;

struct Value {
    std::variant<double, bool, std::string, List, ObjectRef> v;

    bool operator==(const Value&) const = default;
};

std::string type_name(const Value& v);

/// Lists may nest at most this deep, which keeps recursive copies and comparisons shallow.
inline constexpr int kMaxValueNesting = 32;

inline int nesting(const Value& v) {
    const auto* l = std::get_if<List>(&v.v);
    if (l == nullptr) return 0;
    int d = 0;
    for (const Value& x : *l) d = std::max(d, nesting(x));
    return d + 1;
}

/// Mutable state a builtin may touch.
struct Context {
    std::vector<Waypoint>& work;
    const Scene& scene;
    std::vector<TraceEntry>& trace;
    std::size_t& steps;
    std::size_t budget;

    void charge(std::size_t n) {
        steps += n;
        if (steps > budget) throw BudgetExceeded(budget);
    }
    void note(std::string description) { trace.push_back({steps, std::move(description)}); }
};

/// Arguments aligned with BuiltinInfo::params; missing optional ones without a default are nullopt.
using BoundArgs = std::vector<std::optional<Value>>;

Value call_builtin(Context& ctx, const BuiltinInfo& info, const BoundArgs& args, SourcePos at);

/// Value of a catalog default (a literal in TrajScript syntax).
Value default_value(const BuiltinParam& p);

}  // namespace ovita::policy::detail
