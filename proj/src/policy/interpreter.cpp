#include "ovita/policy/interpreter.hpp"

#include "runtime.hpp"

#include <cmath>
#include <map>
#include <numbers>

namespace ovita::policy {

namespace {

using detail::BoundArgs;
using detail::Context;
using detail::List;
using detail::ObjectRef;
using detail::Value;

[[noreturn]] void fail(RuntimeErrorKind k, SourcePos at, const std::string& msg) { throw RuntimeError(k, at, msg); }

double checked(double x, SourcePos at) {
    if (!std::isfinite(x)) fail(RuntimeErrorKind::NonFinite, at, "arithmetic produced a non-finite value");
    return x;
}

class Interpreter {
public:
    Interpreter(const Trajectory& input, const Scene& scene, std::size_t budget)
        : work_(input.waypoints()), ctx_{work_, scene, trace_, steps_, budget} {
        scopes_.emplace_back();
        scopes_.back()["PI"] = Value{std::numbers::pi};
    }

    PolicyResult run(const Block& program, const std::string& frame) {
        exec_block(program, false);
        std::size_t clamped = 0;
        for (Waypoint& w : work_) {
            if (w.v < 0.0) {
                w.v = 0.0;
                ++clamped;
            }
        }
        if (clamped > 0) ctx_.note("clamped " + std::to_string(clamped) + " negative speeds to 0");
        return PolicyResult{Trajectory(std::move(work_), frame), std::move(trace_), steps_};
    }

private:
    using Scope = std::map<std::string, Value>;

    void exec_block(const Block& b, bool new_scope) {
        if (new_scope) scopes_.emplace_back();
        for (const Stmt& s : b) exec(s);
        if (new_scope) scopes_.pop_back();
    }

    Value* lookup(const std::string& name) {
        for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
            auto f = it->find(name);
            if (f != it->end()) return &f->second;
        }
        return nullptr;
    }

    void exec(const Stmt& s) {
        ctx_.charge(1);
        std::visit(
            [&](const auto& n) {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, LetStmt>) {
                    Value v = eval(n.value);
                    scopes_.back()[n.name] = std::move(v);
                } else if constexpr (std::is_same_v<T, AssignStmt>) {
                    Value v = eval(n.value);
                    if (lookup(n.name) == nullptr) {
                        fail(RuntimeErrorKind::UndefinedVariable, s.pos, "assignment to undeclared '" + n.name + "' (use let)");
                    }
                    if (!n.index) {
                        *lookup(n.name) = std::move(v);
                        return;
                    }
                    if (detail::nesting(v) + 1 > detail::kMaxValueNesting) {
                        fail(RuntimeErrorKind::InvalidArgument, s.pos, "lists nest too deeply");
                    }
                    const Value idx = eval(*n.index);
                    Value* target = lookup(n.name);
                    auto* l = std::get_if<List>(&target->v);
                    if (l == nullptr) fail(RuntimeErrorKind::TypeError, s.pos, "'" + n.name + "' is not a list");
                    (*l)[list_index(*l, idx, n.index->pos)] = std::move(v);
                } else if constexpr (std::is_same_v<T, ForStmt>) {
                    const long long a = integer(eval(n.start), n.start.pos, "range start");
                    const long long b = integer(eval(n.end), n.end.pos, "range end");
                    const long long step = n.step ? integer(eval(*n.step), n.step->pos, "range step") : 1;
                    if (step == 0) fail(RuntimeErrorKind::InvalidArgument, s.pos, "range step must not be 0");
                    for (long long i = a; step > 0 ? i < b : i > b; i += step) {
                        ctx_.charge(1);
                        scopes_.emplace_back();
                        scopes_.back()[n.var] = Value{static_cast<double>(i)};
                        exec_block(n.body, false);
                        scopes_.pop_back();
                    }
                } else if constexpr (std::is_same_v<T, IfStmt>) {
                    if (truth(eval(n.condition), n.condition.pos)) {
                        exec_block(n.then_body, true);
                    } else {
                        exec_block(n.else_body, true);
                    }
                } else if constexpr (std::is_same_v<T, ExprStmt>) {
                    (void)eval(n.expr);
                }
            },
            s.node);
    }

    static void check_nesting(const Value& v, SourcePos at) {
        if (detail::nesting(v) > detail::kMaxValueNesting) {
            fail(RuntimeErrorKind::InvalidArgument, at,
                 "lists nest deeper than " + std::to_string(detail::kMaxValueNesting) + " levels");
        }
    }

    static bool truth(const Value& v, SourcePos at) {
        const auto* b = std::get_if<bool>(&v.v);
        if (b == nullptr) fail(RuntimeErrorKind::TypeError, at, "condition must be a bool, got " + detail::type_name(v));
        return *b;
    }

    static double number(const Value& v, SourcePos at, const char* what) {
        const auto* d = std::get_if<double>(&v.v);
        if (d == nullptr) fail(RuntimeErrorKind::TypeError, at, std::string(what) + " must be a number, got " + detail::type_name(v));
        return *d;
    }

    static long long integer(const Value& v, SourcePos at, const char* what) {
        const double d = number(v, at, what);
        if (d != std::floor(d) || std::abs(d) > 9.0e15) fail(RuntimeErrorKind::InvalidArgument, at, std::string(what) + " must be an integer");
        return static_cast<long long>(d);
    }

    static std::size_t list_index(const List& l, const Value& idx, SourcePos at) {
        long long i = integer(idx, at, "index");
        const long long n = static_cast<long long>(l.size());
        const long long given = i;
        if (i < 0) i += n;
        if (i < 0 || i >= n) {
            fail(RuntimeErrorKind::IndexOutOfRange, at,
                 "index " + std::to_string(given) + " outside a list of length " + std::to_string(n));
        }
        return static_cast<std::size_t>(i);
    }

    Value eval(const Expr& e) {
        ctx_.charge(1);
        return std::visit(
            [&](const auto& n) -> Value {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, NumberLit>) {
                    return Value{n.value};
                } else if constexpr (std::is_same_v<T, StringLit>) {
                    return Value{n.value};
                } else if constexpr (std::is_same_v<T, BoolLit>) {
                    return Value{n.value};
                } else if constexpr (std::is_same_v<T, VarRef>) {
                    const Value* v = lookup(n.name);
                    if (v == nullptr) fail(RuntimeErrorKind::UndefinedVariable, e.pos, "'" + n.name + "' is not defined");
                    if (const auto* l = std::get_if<List>(&v->v)) ctx_.charge(l->size());
                    return *v;
                } else if constexpr (std::is_same_v<T, ListLit>) {
                    List out;
                    out.reserve(n.items.size());
                    for (const Expr& x : n.items) out.push_back(eval(x));
                    Value v{std::move(out)};
                    check_nesting(v, e.pos);
                    return v;
                } else if constexpr (std::is_same_v<T, Unary>) {
                    Value v = eval(*n.operand);
                    if (n.op == UnaryOp::Not) return Value{!truth(v, e.pos)};
                    return negate(v, e.pos);
                } else if constexpr (std::is_same_v<T, Binary>) {
                    return binary(n, e.pos);
                } else if constexpr (std::is_same_v<T, Call>) {
                    return call(n, e.pos);
                } else if constexpr (std::is_same_v<T, Index>) {
                    const Value target = eval(*n.target);
                    const Value idx = eval(*n.index);
                    const auto* l = std::get_if<List>(&target.v);
                    if (l == nullptr) fail(RuntimeErrorKind::TypeError, e.pos, "cannot index a " + detail::type_name(target));
                    return (*l)[list_index(*l, idx, n.index->pos)];
                } else if constexpr (std::is_same_v<T, Field>) {
                    return field(eval(*n.target), n.name, e.pos);
                }
            },
            e.node);
    }

    Value negate(const Value& v, SourcePos at) {
        if (const auto* d = std::get_if<double>(&v.v)) return Value{-*d};
        if (const auto* l = std::get_if<List>(&v.v)) {
            List out;
            out.reserve(l->size());
            for (const Value& x : *l) out.push_back(negate(x, at));
            return Value{std::move(out)};
        }
        fail(RuntimeErrorKind::TypeError, at, "cannot negate a " + detail::type_name(v));
    }

    Value field(const Value& v, const std::string& name, SourcePos at) {
        if (const auto* o = std::get_if<ObjectRef>(&v.v)) {
            const SceneObject& obj = ctx_.scene.objects()[o->index];
            auto vec = [](const Vec3& p) { return Value{List{Value{p.x()}, Value{p.y()}, Value{p.z()}}}; };
            if (name == "label") return Value{obj.label};
            if (name == "center" || name == "position") return vec(obj.center);
            if (name == "dimensions") return vec(obj.dimensions);
            if (name == "x") return Value{obj.center.x()};
            if (name == "y") return Value{obj.center.y()};
            if (name == "z") return Value{obj.center.z()};
            if (name == "radius") return Value{bounding_sphere(obj).radius};
            fail(RuntimeErrorKind::InvalidArgument, at,
                 "objects have no field '" + name + "' (label, center, position, dimensions, x, y, z, radius)");
        }
        if (const auto* l = std::get_if<List>(&v.v)) {
            static const std::map<std::string, std::size_t> slots = {{"x", 0}, {"y", 1}, {"z", 2}, {"v", 3}};
            auto it = slots.find(name);
            if (it == slots.end()) fail(RuntimeErrorKind::InvalidArgument, at, "lists only have fields x, y, z, v");
            if (it->second >= l->size()) {
                fail(RuntimeErrorKind::IndexOutOfRange, at, "field ." + name + " of a list of length " + std::to_string(l->size()));
            }
            return (*l)[it->second];
        }
        fail(RuntimeErrorKind::TypeError, at, "a " + detail::type_name(v) + " has no fields");
    }

    Value binary(const Binary& b, SourcePos at) {
        if (b.op == BinaryOp::And || b.op == BinaryOp::Or) {
            const bool lhs = truth(eval(*b.lhs), b.lhs->pos);
            if (b.op == BinaryOp::And && !lhs) return Value{false};
            if (b.op == BinaryOp::Or && lhs) return Value{true};
            return Value{truth(eval(*b.rhs), b.rhs->pos)};
        }
        const Value l = eval(*b.lhs);
        const Value r = eval(*b.rhs);
        switch (b.op) {
            case BinaryOp::Eq: return Value{l == r};
            case BinaryOp::Ne: return Value{!(l == r)};
            case BinaryOp::Lt: return Value{number(l, at, "comparison operand") < number(r, at, "comparison operand")};
            case BinaryOp::Le: return Value{number(l, at, "comparison operand") <= number(r, at, "comparison operand")};
            case BinaryOp::Gt: return Value{number(l, at, "comparison operand") > number(r, at, "comparison operand")};
            case BinaryOp::Ge: return Value{number(l, at, "comparison operand") >= number(r, at, "comparison operand")};
            default: return arith(b.op, l, r, at);
        }
    }

    // Numbers combine pointwise; lists combine elementwise with lists of equal
    // length and broadcast against numbers. `+` also concatenates strings.
    Value arith(BinaryOp op, const Value& l, const Value& r, SourcePos at) {
        const auto* ld = std::get_if<double>(&l.v);
        const auto* rd = std::get_if<double>(&r.v);
        if (ld && rd) return Value{scalar(op, *ld, *rd, at)};
        if (op == BinaryOp::Add) {
            const auto* ls = std::get_if<std::string>(&l.v);
            const auto* rs = std::get_if<std::string>(&r.v);
            if (ls && rs) return Value{*ls + *rs};
        }
        const auto* ll = std::get_if<List>(&l.v);
        const auto* rl = std::get_if<List>(&r.v);
        if (ll && rl) {
            if (op != BinaryOp::Add && op != BinaryOp::Sub) {
                fail(RuntimeErrorKind::TypeError, at, "lists only add or subtract elementwise");
            }
            if (ll->size() != rl->size()) {
                fail(RuntimeErrorKind::InvalidArgument, at, "list lengths differ (" + std::to_string(ll->size()) + " vs " +
                                                                std::to_string(rl->size()) + ")");
            }
            ctx_.charge(ll->size());
            List out;
            out.reserve(ll->size());
            for (std::size_t i = 0; i < ll->size(); ++i) out.push_back(arith(op, (*ll)[i], (*rl)[i], at));
            return Value{std::move(out)};
        }
        if (ll && rd && op != BinaryOp::Mod) {
            ctx_.charge(ll->size());
            List out;
            out.reserve(ll->size());
            for (const Value& x : *ll) out.push_back(arith(op, x, r, at));
            return Value{std::move(out)};
        }
        if (ld && rl && op == BinaryOp::Mul) {
            ctx_.charge(rl->size());
            List out;
            out.reserve(rl->size());
            for (const Value& x : *rl) out.push_back(arith(op, l, x, at));
            return Value{std::move(out)};
        }
        fail(RuntimeErrorKind::TypeError, at, "unsupported operands " + detail::type_name(l) + " and " + detail::type_name(r));
    }

    static double scalar(BinaryOp op, double a, double b, SourcePos at) {
        switch (op) {
            case BinaryOp::Add: return checked(a + b, at);
            case BinaryOp::Sub: return checked(a - b, at);
            case BinaryOp::Mul: return checked(a * b, at);
            case BinaryOp::Div:
                if (b == 0.0) fail(RuntimeErrorKind::DivisionByZero, at, "division by zero");
                return checked(a / b, at);
            case BinaryOp::Mod: {
                if (b == 0.0) fail(RuntimeErrorKind::DivisionByZero, at, "modulo by zero");
                // Result takes the sign of the divisor.
                double m = std::fmod(a, b);
                if (m != 0.0 && ((m < 0.0) != (b < 0.0))) m += b;
                return checked(m, at);
            }
            default: return 0.0;
        }
    }

    Value call(const Call& c, SourcePos at) {
        const BuiltinInfo* info = find_builtin(c.callee);
        if (info == nullptr) fail(RuntimeErrorKind::InvalidArgument, at, "unknown function '" + c.callee + "'");
        BoundArgs args(info->params.size());
        std::size_t positional = 0;
        for (const Arg& a : c.args) {
            std::size_t slot = 0;
            if (a.name) {
                slot = info->params.size();
                for (std::size_t i = 0; i < info->params.size(); ++i) {
                    if (info->params[i].name == *a.name) slot = i;
                }
                if (slot == info->params.size()) {
                    fail(RuntimeErrorKind::InvalidArgument, a.value->pos,
                         c.callee + "() has no parameter '" + *a.name + "'" + signature_hint(*info));
                }
            } else {
                slot = positional++;
                if (slot >= info->params.size()) {
                    fail(RuntimeErrorKind::InvalidArgument, a.value->pos,
                         c.callee + "() takes at most " + std::to_string(info->params.size()) + " arguments" +
                             signature_hint(*info));
                }
            }
            if (args[slot]) {
                fail(RuntimeErrorKind::InvalidArgument, a.value->pos,
                     "parameter '" + info->params[slot].name + "' given twice");
            }
            args[slot] = eval(*a.value);
        }
        for (std::size_t i = 0; i < info->params.size(); ++i) {
            if (args[i]) continue;
            const BuiltinParam& p = info->params[i];
            if (p.required) {
                fail(RuntimeErrorKind::InvalidArgument, at,
                     c.callee + "() is missing '" + p.name + "'" + signature_hint(*info));
            }
            if (!p.default_value.empty()) args[i] = detail::default_value(p);
        }
        ctx_.charge(1);
        return detail::call_builtin(ctx_, *info, args, at);
    }

    static std::string signature_hint(const BuiltinInfo& info) {
        std::string s = "; signature: " + info.name + "(";
        for (std::size_t i = 0; i < info.params.size(); ++i) {
            if (i) s += ", ";
            s += info.params[i].name;
            if (!info.params[i].required) s += info.params[i].default_value.empty() ? "?" : "=" + info.params[i].default_value;
        }
        return s + ")";
    }

    std::vector<Waypoint> work_;
    std::vector<TraceEntry> trace_;
    std::size_t steps_ = 0;
    Context ctx_;
    std::vector<Scope> scopes_;
};

}  // namespace

PolicyResult execute(const PolicyProgram& program, const Trajectory& input, const Scene& scene, std::size_t budget) {
    if (budget == 0) throw InvalidArgument("step budget must be positive");
    Interpreter interp(input, scene, budget);
    return interp.run(program.ast, input.frame());
}

}  // namespace ovita::policy
