#include "runtime.hpp"

#include "lexer.hpp"
#include "ovita/policy/parser.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>

namespace ovita::policy {

std::string to_string(BuiltinKind k) {
    switch (k) {
        case BuiltinKind::Transform: return "transform";
        case BuiltinKind::Query: return "query";
        case BuiltinKind::Math: return "math";
    }
    return "unknown";
}

std::string to_string(RuntimeErrorKind k) {
    switch (k) {
        case RuntimeErrorKind::DivisionByZero: return "DivisionByZero";
        case RuntimeErrorKind::UnknownObjectLabel: return "UnknownObjectLabel";
        case RuntimeErrorKind::IndexOutOfRange: return "IndexOutOfRange";
        case RuntimeErrorKind::TypeError: return "TypeError";
        case RuntimeErrorKind::InvalidArgument: return "InvalidArgument";
        case RuntimeErrorKind::UndefinedVariable: return "UndefinedVariable";
        case RuntimeErrorKind::NonFinite: return "NonFinite";
        case RuntimeErrorKind::OutputTooLarge: return "OutputTooLarge";
    }
    return "Unknown";
}

namespace detail {

std::string type_name(const Value& v) {
    switch (v.v.index()) {
        case 0: return "number";
        case 1: return "bool";
        case 2: return "string";
        case 3: return "list";
        default: return "object";
    }
}

namespace {

using Impl = std::function<Value(Context&, const BoundArgs&, SourcePos)>;

struct Entry {
    BuiltinInfo info;
    Impl fn;
};

[[noreturn]] void fail(RuntimeErrorKind k, SourcePos at, const std::string& msg) { throw RuntimeError(k, at, msg); }

double finite(double x, SourcePos at, const char* what) {
    if (!std::isfinite(x)) fail(RuntimeErrorKind::NonFinite, at, std::string(what) + " produced a non-finite value");
    return x;
}

double num(const std::optional<Value>& v, const char* name, SourcePos at) {
    if (!v) fail(RuntimeErrorKind::InvalidArgument, at, std::string("missing argument '") + name + "'");
    const auto* d = std::get_if<double>(&v->v);
    if (d == nullptr) fail(RuntimeErrorKind::TypeError, at, std::string("'") + name + "' must be a number, got " + type_name(*v));
    return *d;
}

long long integer(const std::optional<Value>& v, const char* name, SourcePos at) {
    const double d = num(v, name, at);
    if (d != std::floor(d) || std::abs(d) > 9.0e15) {
        fail(RuntimeErrorKind::InvalidArgument, at, std::string("'") + name + "' must be an integer");
    }
    return static_cast<long long>(d);
}

const std::string& str(const std::optional<Value>& v, const char* name, SourcePos at) {
    if (!v) fail(RuntimeErrorKind::InvalidArgument, at, std::string("missing argument '") + name + "'");
    const auto* s = std::get_if<std::string>(&v->v);
    if (s == nullptr) fail(RuntimeErrorKind::TypeError, at, std::string("'") + name + "' must be a string, got " + type_name(*v));
    return *s;
}

const List& list(const std::optional<Value>& v, const char* name, SourcePos at) {
    if (!v) fail(RuntimeErrorKind::InvalidArgument, at, std::string("missing argument '") + name + "'");
    const auto* l = std::get_if<List>(&v->v);
    if (l == nullptr) fail(RuntimeErrorKind::TypeError, at, std::string("'") + name + "' must be a list, got " + type_name(*v));
    return *l;
}

std::vector<double> numbers(const List& l, const char* name, SourcePos at) {
    std::vector<double> out;
    out.reserve(l.size());
    for (const Value& x : l) {
        const auto* d = std::get_if<double>(&x.v);
        if (d == nullptr) fail(RuntimeErrorKind::TypeError, at, std::string("'") + name + "' must contain only numbers");
        out.push_back(*d);
    }
    return out;
}

Vec3 vec3(const std::optional<Value>& v, const char* name, SourcePos at) {
    const auto xs = numbers(list(v, name, at), name, at);
    if (xs.size() != 3) fail(RuntimeErrorKind::InvalidArgument, at, std::string("'") + name + "' must have 3 entries");
    return {xs[0], xs[1], xs[2]};
}

Value number_value(double d) { return Value{d}; }

Value vec_value(std::initializer_list<double> xs) {
    List l;
    for (double x : xs) l.push_back(Value{x});
    return Value{std::move(l)};
}

Value vec_value(const Vec3& p) { return vec_value({p.x(), p.y(), p.z()}); }

Value waypoint_value(const Waypoint& w) { return vec_value({w.x, w.y, w.z, w.v}); }

Value none() { return Value{false}; }

std::size_t waypoint_index(const Context& ctx, const std::optional<Value>& v, const char* name, SourcePos at) {
    const long long n = static_cast<long long>(ctx.work.size());
    long long i = integer(v, name, at);
    if (i < 0) i += n;
    if (i < 0 || i >= n) {
        fail(RuntimeErrorKind::IndexOutOfRange, at,
             std::string("'") + name + "' = " + std::to_string(integer(v, name, at)) + " outside a trajectory of " +
                 std::to_string(n) + " waypoints");
    }
    return static_cast<std::size_t>(i);
}

void check_size(const Context& ctx, std::size_t extra, SourcePos at) {
    if (ctx.work.size() + extra > kMaxOutputWaypoints) {
        fail(RuntimeErrorKind::OutputTooLarge, at,
             "trajectory would exceed " + std::to_string(kMaxOutputWaypoints) + " waypoints");
    }
}

void check_finite(const Context& ctx, SourcePos at, const char* what) {
    for (const Waypoint& w : ctx.work) {
        if (!std::isfinite(w.x) || !std::isfinite(w.y) || !std::isfinite(w.z) || !std::isfinite(w.v)) {
            fail(RuntimeErrorKind::NonFinite, at, std::string(what) + " produced a non-finite waypoint");
        }
    }
}

std::string fmt(double x) { return to_string(ParamValue{x}); }
std::string fmt(const Vec3& p) { return "(" + fmt(p.x()) + ", " + fmt(p.y()) + ", " + fmt(p.z()) + ")"; }

Vec3 tangent(const std::vector<Waypoint>& w, std::size_t i) {
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = std::min(i + 1, w.size() - 1);
    Vec3 t = w[b].position() - w[a].position();
    const double n = t.norm();
    if (n < 1e-12) return {1.0, 0.0, 0.0};
    return t / n;
}

// Unit vector orthogonal to t, preferring the horizontal direction cross(t, z).
Vec3 lateral(const Vec3& t) {
    Vec3 n = t.cross(Vec3::UnitZ());
    if (n.norm() < 1e-9) n = t.cross(Vec3::UnitX());
    return n.normalized();
}

double falloff_weight(const std::string& kind, double d, double sigma, SourcePos at) {
    if (kind == "uniform") return 1.0;
    if (!(sigma > 0.0)) fail(RuntimeErrorKind::InvalidArgument, at, "'sigma' must be positive");
    if (kind == "gaussian") return std::exp(-(d * d) / (2.0 * sigma * sigma));
    if (kind == "linear") return std::max(0.0, 1.0 - d / sigma);
    fail(RuntimeErrorKind::InvalidArgument, at, "'falloff' must be \"gaussian\", \"linear\" or \"uniform\"");
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

const SceneObject& lookup_object(const Context& ctx, const std::string& label, SourcePos at) {
    const SceneObject* o = ctx.scene.find(label);
    if (o == nullptr) {
        std::string known;
        for (const auto& obj : ctx.scene.objects()) known += (known.empty() ? "" : ", ") + obj.label;
        fail(RuntimeErrorKind::UnknownObjectLabel, at,
             "no object labelled '" + label + "' (scene has: " + (known.empty() ? "none" : known) + ")");
    }
    return *o;
}

Value object_value(const Context& ctx, const SceneObject& o) {
    const auto& objs = ctx.scene.objects();
    for (std::size_t i = 0; i < objs.size(); ++i) {
        if (objs[i].label == o.label) return Value{ObjectRef{i}};
    }
    return none();
}

Value nudge(Context& ctx, const BoundArgs& a, SourcePos at, bool toward) {
    const std::string& label = str(a[0], "label", at);
    const double offset = num(a[1], "offset", at);
    const std::string& kind = str(a[2], "falloff", at);
    const double sigma = num(a[3], "sigma", at);
    const Vec3 o = lookup_object(ctx, label, at).center;
    ctx.charge(ctx.work.size());
    double moved = 0.0;
    for (Waypoint& w : ctx.work) {
        const Vec3 p = w.position();
        const Vec3 diff = o - p;
        const double d = diff.norm();
        if (d == 0.0) continue;
        const double wgt = falloff_weight(kind, d, sigma, at);
        double step = offset * wgt;
        if (toward) step = std::min(step, d);
        if (!toward) step = -step;
        const Vec3 q = p + step * (diff / d);
        w.x = q.x();
        w.y = q.y();
        w.z = q.z();
        moved = std::max(moved, std::abs(step));
    }
    check_finite(ctx, at, toward ? "approach" : "retreat");
    ctx.note(std::string(toward ? "approach" : "retreat") + " '" + label + "': offset " + fmt(offset) + ", " + kind +
             " falloff, sigma " + fmt(sigma) + ", max displacement " + fmt(moved));
    return none();
}

std::vector<Entry> make_table() {
    using K = BuiltinKind;
    std::vector<Entry> t;
    auto add = [&t](std::string name, K kind, std::vector<BuiltinParam> params, std::string math, Impl fn) {
        t.push_back({BuiltinInfo{std::move(name), kind, std::move(params), std::move(math)}, std::move(fn)});
    };
    auto req = [](const char* n) { return BuiltinParam{n, true, ""}; };
    auto opt = [](const char* n, const char* d = "") { return BuiltinParam{n, false, d}; };

    // ---- transforms ----
    add("translate", K::Transform, {opt("axis"), opt("by"), opt("vector")},
        "p_i += d for every waypoint. d = by * e_axis when axis (\"x\", \"y\" or \"z\") is given, "
        "d = vector (times by, if given) otherwise. With axis only that coordinate is touched. Speeds unchanged.",
        [](Context& ctx, const BoundArgs& a, SourcePos at) {
            Vec3 d = Vec3::Zero();
            int only = -1;
            if (a[0]) {
                const std::string& axis = str(a[0], "axis", at);
                if (axis != "x" && axis != "y" && axis != "z") {
                    fail(RuntimeErrorKind::InvalidArgument, at, "'axis' must be \"x\", \"y\" or \"z\"");
                }
                if (a[2]) fail(RuntimeErrorKind::InvalidArgument, at, "give either 'axis' or 'vector', not both");
                only = axis[0] - 'x';
                d[only] = num(a[1], "by", at);
            } else if (a[2]) {
                d = vec3(a[2], "vector", at);
                if (a[1]) d *= num(a[1], "by", at);
            } else {
                fail(RuntimeErrorKind::InvalidArgument, at, "translate needs 'axis' and 'by', or 'vector'");
            }
            ctx.charge(ctx.work.size());
            for (Waypoint& w : ctx.work) {
                if (only < 0 || only == 0) w.x += d.x();
                if (only < 0 || only == 1) w.y += d.y();
                if (only < 0 || only == 2) w.z += d.z();
            }
            check_finite(ctx, at, "translate");
            ctx.note("translate: shifted " + std::to_string(ctx.work.size()) + " waypoints by " + fmt(d));
            return none();
        });

    add("translate_range", K::Transform, {req("start"), req("end"), req("vector")},
        "p_i += vector for start <= i < end (half-open, 0 <= start <= end <= N). Speeds unchanged.",
        [](Context& ctx, const BoundArgs& a, SourcePos at) {
            const long long s = integer(a[0], "start", at);
            const long long e = integer(a[1], "end", at);
            const long long n = static_cast<long long>(ctx.work.size());
            if (s < 0 || e < s || e > n) {
                fail(RuntimeErrorKind::IndexOutOfRange, at,
                     "range [" + std::to_string(s) + ", " + std::to_string(e) + ") outside 0.." + std::to_string(n));
            }
            const Vec3 d = vec3(a[2], "vector", at);
            ctx.charge(static_cast<std::size_t>(e - s) + 1);
            for (long long i = s; i < e; ++i) {
                Waypoint& w = ctx.work[static_cast<std::size_t>(i)];
                w.x += d.x();
                w.y += d.y();
                w.z += d.z();
            }
            check_finite(ctx, at, "translate_range");
            ctx.note("translate_range: shifted waypoints [" + std::to_string(s) + ", " + std::to_string(e) + ") by " +
                     fmt(d));
            return none();
        });

    add("scale_speed", K::Transform,
        {opt("factor"), opt("profile"), opt("value"), opt("ramp", "0.2"), opt("to", "0.5")},
        "profile \"constant\": v_i = value (default: mean v). "
        "profile \"trapezoidal\": v_i = peak * min(1, i / (ramp (N-1)), (N-1-i) / (ramp (N-1))), "
        "peak = value (default: max v); ramp = 0 gives v_i = peak. "
        "profile \"linear_ramp\": v_i *= 1 + (to - 1) i / (N-1). "
        "Then, if factor is given, v_i *= factor.",
        [](Context& ctx, const BoundArgs& a, SourcePos at) {
            if (!a[0] && !a[1]) fail(RuntimeErrorKind::InvalidArgument, at, "scale_speed needs 'factor' or 'profile'");
            auto& w = ctx.work;
            const std::size_t n = w.size();
            ctx.charge(n);
            std::string what;
            if (a[1]) {
                const std::string& profile = str(a[1], "profile", at);
                if (profile == "constant") {
                    double c = 0.0;
                    if (a[2]) {
                        c = num(a[2], "value", at);
                    } else {
                        for (const auto& p : w) c += p.v;
                        c /= static_cast<double>(n);
                    }
                    for (auto& p : w) p.v = c;
                    what = "constant speed " + fmt(c);
                } else if (profile == "trapezoidal") {
                    double peak = 0.0;
                    if (a[2]) {
                        peak = num(a[2], "value", at);
                    } else {
                        for (const auto& p : w) peak = std::max(peak, p.v);
                    }
                    const double ramp = num(a[3], "ramp", at);
                    if (ramp < 0.0 || ramp > 0.5) fail(RuntimeErrorKind::InvalidArgument, at, "'ramp' must lie in [0, 0.5]");
                    const double span = ramp * static_cast<double>(n - 1);
                    for (std::size_t i = 0; i < n; ++i) {
                        double f = 1.0;
                        if (span > 0.0) {
                            const double up = static_cast<double>(i) / span;
                            const double down = static_cast<double>(n - 1 - i) / span;
                            f = std::min({1.0, up, down});
                        }
                        w[i].v = peak * f;
                    }
                    what = "trapezoidal profile, peak " + fmt(peak) + ", ramp " + fmt(ramp);
                } else if (profile == "linear_ramp") {
                    const double to = num(a[4], "to", at);
                    for (std::size_t i = 0; i < n; ++i) {
                        w[i].v *= 1.0 + (to - 1.0) * static_cast<double>(i) / static_cast<double>(n - 1);
                    }
                    what = "linear ramp to " + fmt(to) + "x";
                } else {
                    fail(RuntimeErrorKind::InvalidArgument, at,
                         "'profile' must be \"constant\", \"trapezoidal\" or \"linear_ramp\"");
                }
            }
            if (a[0]) {
                const double f = num(a[0], "factor", at);
                for (auto& p : w) p.v *= f;
                what += (what.empty() ? "" : ", then ") + std::string("factor ") + fmt(f);
            }
            check_finite(ctx, at, "scale_speed");
            ctx.note("scale_speed: " + what);
            return none();
        });

    const std::string nudge_math =
        "Let o be the object's center, d_i = |o - p_i| and u_i = (o - p_i) / d_i. Weight w_i is "
        "exp(-d_i^2 / (2 sigma^2)) for \"gaussian\", max(0, 1 - d_i / sigma) for \"linear\", 1 for \"uniform\". ";
    add("approach", K::Transform, {req("label"), req("offset"), opt("falloff", "\"gaussian\""), opt("sigma", "0.3")},
        nudge_math + "p_i += min(offset w_i, d_i) u_i, so no waypoint passes the center. Waypoints at the center stay put.",
        [](Context& ctx, const BoundArgs& a, SourcePos at) { return nudge(ctx, a, at, true); });
    add("retreat", K::Transform, {req("label"), req("offset"), opt("falloff", "\"gaussian\""), opt("sigma", "0.3")},
        nudge_math + "p_i -= offset w_i u_i. Waypoints at the center stay put.",
        [](Context& ctx, const BoundArgs& a, SourcePos at) { return nudge(ctx, a, at, false); });

    add("insert_spiral", K::Transform,
        {req("center_index"), req("radius"), opt("turns", "2"), opt("points", "24")},
        "Inserts `points` waypoints after waypoint k = center_index. With c = p_k, e = p_{k+1} (c when k is last), "
        "t the unit tangent at k, a = unit(cross(t, z)) (cross(t, x) if t is vertical) and b = cross(t, a): "
        "for j = 1..points, s = j / (points + 1), theta = 2 pi turns s, r = radius sin(pi s), "
        "q_j = c + s (e - c) + r (cos(theta) a + sin(theta) b), v_j = v_k. Existing waypoints are untouched.",
        [](Context& ctx, const BoundArgs& a, SourcePos at) {
            const std::size_t k = waypoint_index(ctx, a[0], "center_index", at);
            const double radius = num(a[1], "radius", at);
            const double turns = num(a[2], "turns", at);
            const long long pts = integer(a[3], "points", at);
            if (radius < 0.0) fail(RuntimeErrorKind::InvalidArgument, at, "'radius' must be non-negative");
            if (pts < 1) fail(RuntimeErrorKind::InvalidArgument, at, "'points' must be at least 1");
            check_size(ctx, static_cast<std::size_t>(std::min<long long>(pts, kMaxOutputWaypoints + 1)), at);
            ctx.charge(static_cast<std::size_t>(pts) + ctx.work.size());
            auto& w = ctx.work;
            const Vec3 c = w[k].position();
            const Vec3 e = k + 1 < w.size() ? w[k + 1].position() : c;
            const Vec3 t = tangent(w, k);
            const Vec3 ua = lateral(t);
            const Vec3 ub = t.cross(ua);
            std::vector<Waypoint> added;
            added.reserve(static_cast<std::size_t>(pts));
            for (long long j = 1; j <= pts; ++j) {
                const double s = static_cast<double>(j) / static_cast<double>(pts + 1);
                const double theta = 2.0 * std::numbers::pi * turns * s;
                const double r = radius * std::sin(std::numbers::pi * s);
                const Vec3 q = c + s * (e - c) + r * (std::cos(theta) * ua + std::sin(theta) * ub);
                added.push_back({q.x(), q.y(), q.z(), w[k].v});
            }
            w.insert(w.begin() + static_cast<std::ptrdiff_t>(k + 1), added.begin(), added.end());
            check_finite(ctx, at, "insert_spiral");
            ctx.note("insert_spiral: " + std::to_string(pts) + " waypoints after index " + std::to_string(k) +
                     ", radius " + fmt(radius) + ", " + fmt(turns) + " turns");
            return none();
        });

    add("insert_pause", K::Transform, {req("index"), req("steps")},
        "Inserts `steps` copies of waypoint `index` with v = 0 directly after it.",
        [](Context& ctx, const BoundArgs& a, SourcePos at) {
            const std::size_t k = waypoint_index(ctx, a[0], "index", at);
            const long long steps = integer(a[1], "steps", at);
            if (steps < 0) fail(RuntimeErrorKind::InvalidArgument, at, "'steps' must be non-negative");
            check_size(ctx, static_cast<std::size_t>(std::min<long long>(steps, kMaxOutputWaypoints + 1)), at);
            ctx.charge(static_cast<std::size_t>(steps) + ctx.work.size());
            Waypoint hold = ctx.work[k];
            hold.v = 0.0;
            ctx.work.insert(ctx.work.begin() + static_cast<std::ptrdiff_t>(k + 1), static_cast<std::size_t>(steps), hold);
            ctx.note("insert_pause: " + std::to_string(steps) + " stationary waypoints after index " + std::to_string(k));
            return none();
        });

    add("zigzag", K::Transform, {req("amplitude"), opt("period", "4")},
        "p_i += amplitude tri(frac(i / period)) n_i, where tri(f) = 1 - 4 |f - 0.5| and n_i = unit(cross(t_i, z)) "
        "(cross(t_i, x) if t_i is vertical), t_i the central-difference tangent. Speeds unchanged.",
        [](Context& ctx, const BoundArgs& a, SourcePos at) {
            const double amp = num(a[0], "amplitude", at);
            const double period = num(a[1], "period", at);
            if (!(period > 0.0)) fail(RuntimeErrorKind::InvalidArgument, at, "'period' must be positive");
            auto& w = ctx.work;
            ctx.charge(w.size());
            std::vector<Vec3> offs(w.size());
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double q = static_cast<double>(i) / period;
                const double f = q - std::floor(q);
                offs[i] = amp * (1.0 - 4.0 * std::abs(f - 0.5)) * lateral(tangent(w, i));
            }
            for (std::size_t i = 0; i < w.size(); ++i) {
                w[i].x += offs[i].x();
                w[i].y += offs[i].y();
                w[i].z += offs[i].z();
            }
            check_finite(ctx, at, "zigzag");
            ctx.note("zigzag: amplitude " + fmt(amp) + ", period " + fmt(period));
            return none();
        });

    add("resample", K::Transform, {req("n")},
        "Replaces the trajectory with n >= 2 waypoints equally spaced in arc length along the polyline "
        "(by index when the length is zero); positions and speeds are linearly interpolated.",
        [](Context& ctx, const BoundArgs& a, SourcePos at) {
            const long long n = integer(a[0], "n", at);
            if (n < 2) fail(RuntimeErrorKind::InvalidArgument, at, "'n' must be at least 2");
            if (static_cast<unsigned long long>(n) > kMaxOutputWaypoints) {
                fail(RuntimeErrorKind::OutputTooLarge, at, "resample to more than " + std::to_string(kMaxOutputWaypoints));
            }
            const auto& w = ctx.work;
            ctx.charge(static_cast<std::size_t>(n) + w.size());
            std::vector<double> s(w.size(), 0.0);
            for (std::size_t i = 1; i < w.size(); ++i) s[i] = s[i - 1] + (w[i].position() - w[i - 1].position()).norm();
            const bool by_index = s.back() < 1e-12;
            if (by_index) {
                for (std::size_t i = 0; i < w.size(); ++i) s[i] = static_cast<double>(i);
            }
            const double total = s.back();
            std::vector<Waypoint> out;
            out.reserve(static_cast<std::size_t>(n));
            std::size_t seg = 0;
            for (long long j = 0; j < n; ++j) {
                const double target = j == n - 1 ? total : total * static_cast<double>(j) / static_cast<double>(n - 1);
                while (seg + 2 < w.size() && s[seg + 1] < target) ++seg;
                const double len = s[seg + 1] - s[seg];
                const double f = len > 0.0 ? std::clamp((target - s[seg]) / len, 0.0, 1.0) : 0.0;
                const Waypoint& p = w[seg];
                const Waypoint& q = w[seg + 1];
                out.push_back({p.x + f * (q.x - p.x), p.y + f * (q.y - p.y), p.z + f * (q.z - p.z), p.v + f * (q.v - p.v)});
            }
            const std::size_t before = w.size();
            ctx.work = std::move(out);
            ctx.note("resample: " + std::to_string(before) + " -> " + std::to_string(n) + " waypoints");
            return none();
        });

    add("set_goal", K::Transform, {req("point"), opt("blend", "0")},
        "With D = point - p_{N-1}: p_i += w_i D, w_i = blend i / (N-1) + (1 - blend) [i = N-1]. "
        "blend = 0 moves only the goal; blend = 1 shears the whole path linearly. Speeds unchanged.",
        [](Context& ctx, const BoundArgs& a, SourcePos at) {
            const Vec3 target = vec3(a[0], "point", at);
            const double blend = num(a[1], "blend", at);
            if (blend < 0.0 || blend > 1.0) fail(RuntimeErrorKind::InvalidArgument, at, "'blend' must lie in [0, 1]");
            auto& w = ctx.work;
            const std::size_t n = w.size();
            ctx.charge(n);
            const Vec3 d = target - w.back().position();
            for (std::size_t i = 0; i < n; ++i) {
                const double wi = blend * static_cast<double>(i) / static_cast<double>(n - 1) + (i == n - 1 ? 1.0 - blend : 0.0);
                w[i].x += wi * d.x();
                w[i].y += wi * d.y();
                w[i].z += wi * d.z();
            }
            check_finite(ctx, at, "set_goal");
            ctx.note("set_goal: goal moved to " + fmt(target) + ", blend " + fmt(blend));
            return none();
        });

    add("set_trajectory", K::Transform, {req("points")},
        "Replaces the working trajectory with `points`, a list of at least 2 [x, y, z, v] lists.",
        [](Context& ctx, const BoundArgs& a, SourcePos at) {
            const List& pts = list(a[0], "points", at);
            if (pts.size() < 2) fail(RuntimeErrorKind::InvalidArgument, at, "'points' needs at least 2 waypoints");
            if (pts.size() > kMaxOutputWaypoints) fail(RuntimeErrorKind::OutputTooLarge, at, "too many waypoints");
            ctx.charge(pts.size());
            std::vector<Waypoint> out;
            out.reserve(pts.size());
            for (const Value& p : pts) {
                const auto xs = numbers(list(p, "points[i]", at), "points[i]", at);
                if (xs.size() != 4) fail(RuntimeErrorKind::InvalidArgument, at, "each waypoint must be [x, y, z, v]");
                out.push_back({xs[0], xs[1], xs[2], xs[3]});
            }
            ctx.work = std::move(out);
            ctx.note("set_trajectory: " + std::to_string(ctx.work.size()) + " waypoints");
            return none();
        });

    add("set_waypoint", K::Transform, {req("index"), req("point")},
        "Overwrites waypoint `index` (negative counts from the end) with [x, y, z] (speed kept) or [x, y, z, v].",
        [](Context& ctx, const BoundArgs& a, SourcePos at) {
            const std::size_t k = waypoint_index(ctx, a[0], "index", at);
            const auto xs = numbers(list(a[1], "point", at), "point", at);
            if (xs.size() != 3 && xs.size() != 4) fail(RuntimeErrorKind::InvalidArgument, at, "'point' must have 3 or 4 entries");
            Waypoint& w = ctx.work[k];
            w.x = xs[0];
            w.y = xs[1];
            w.z = xs[2];
            if (xs.size() == 4) w.v = xs[3];
            return none();
        });

    // ---- queries ----
    add("get_trajectory", K::Query, {}, "The working trajectory as a list of [x, y, z, v] lists.",
        [](Context& ctx, const BoundArgs&, SourcePos) {
            ctx.charge(ctx.work.size());
            List out;
            out.reserve(ctx.work.size());
            for (const Waypoint& w : ctx.work) out.push_back(waypoint_value(w));
            return Value{std::move(out)};
        });
    add("num_waypoints", K::Query, {}, "N, the current number of waypoints.",
        [](Context& ctx, const BoundArgs&, SourcePos) { return number_value(static_cast<double>(ctx.work.size())); });
    add("waypoint", K::Query, {req("index")}, "[x, y, z, v] of waypoint `index` (negative counts from the end).",
        [](Context& ctx, const BoundArgs& a, SourcePos at) {
            return waypoint_value(ctx.work[waypoint_index(ctx, a[0], "index", at)]);
        });
    add("detect_objects", K::Query, {},
        "All scene objects in scene order. Objects expose .label, .center (= .position), .dimensions, "
        ".x, .y, .z and .radius (bounding-sphere radius |dimensions| / 2).",
        [](Context& ctx, const BoundArgs&, SourcePos) {
            List out;
            for (std::size_t i = 0; i < ctx.scene.objects().size(); ++i) out.push_back(Value{ObjectRef{i}});
            ctx.charge(out.size());
            return Value{std::move(out)};
        });
    add("object", K::Query, {req("label")}, "The scene object with this label; UnknownObjectLabel otherwise.",
        [](Context& ctx, const BoundArgs& a, SourcePos at) {
            return object_value(ctx, lookup_object(ctx, str(a[0], "label", at), at));
        });
    add("log", K::Query, {req("message")}, "Appends `message` (any value) to the trace.",
        [](Context& ctx, const BoundArgs& a, SourcePos) {
            std::string text;
            if (const auto* s = std::get_if<std::string>(&a[0]->v)) {
                text = *s;
            } else if (const auto* d = std::get_if<double>(&a[0]->v)) {
                text = fmt(*d);
            } else {
                text = "<" + type_name(*a[0]) + ">";
            }
            ctx.note("log: " + text);
            return none();
        });

    // ---- math ----
    auto unary = [&add, &req](const char* name, double (*f)(double), const char* math) {
        add(name, K::Math, {req("x")}, math, [f, name](Context&, const BoundArgs& a, SourcePos at) {
            return number_value(finite(f(num(a[0], "x", at)), at, name));
        });
    };
    unary("sqrt", [](double x) { return std::sqrt(x); }, "Square root; NonFinite for x < 0.");
    unary("abs", [](double x) { return std::abs(x); }, "|x|.");
    unary("sin", [](double x) { return std::sin(x); }, "sin(x), radians.");
    unary("cos", [](double x) { return std::cos(x); }, "cos(x), radians.");
    unary("tan", [](double x) { return std::tan(x); }, "tan(x), radians.");
    unary("exp", [](double x) { return std::exp(x); }, "e^x.");
    unary("ln", [](double x) { return std::log(x); }, "Natural logarithm; NonFinite for x <= 0.");
    unary("floor", [](double x) { return std::floor(x); }, "Largest integer <= x.");
    unary("ceil", [](double x) { return std::ceil(x); }, "Smallest integer >= x.");
    unary("round", [](double x) { return std::round(x); }, "Nearest integer, halves away from zero.");

    add("atan2", K::Math, {req("y"), req("x")}, "Angle of (x, y) in radians.",
        [](Context&, const BoundArgs& a, SourcePos at) { return number_value(std::atan2(num(a[0], "y", at), num(a[1], "x", at))); });
    add("pow", K::Math, {req("x"), req("y")}, "x^y.", [](Context&, const BoundArgs& a, SourcePos at) {
        return number_value(finite(std::pow(num(a[0], "x", at), num(a[1], "y", at)), at, "pow"));
    });
    add("min", K::Math, {req("a"), req("b")}, "Smaller of a and b.",
        [](Context&, const BoundArgs& a, SourcePos at) { return number_value(std::min(num(a[0], "a", at), num(a[1], "b", at))); });
    add("max", K::Math, {req("a"), req("b")}, "Larger of a and b.",
        [](Context&, const BoundArgs& a, SourcePos at) { return number_value(std::max(num(a[0], "a", at), num(a[1], "b", at))); });
    add("clamp", K::Math, {req("x"), req("lo"), req("hi")}, "min(max(x, lo), hi); requires lo <= hi.",
        [](Context&, const BoundArgs& a, SourcePos at) {
            const double lo = num(a[1], "lo", at), hi = num(a[2], "hi", at);
            if (lo > hi) fail(RuntimeErrorKind::InvalidArgument, at, "'lo' must not exceed 'hi'");
            return number_value(std::min(std::max(num(a[0], "x", at), lo), hi));
        });
    add("len", K::Math, {req("x")}, "Number of elements of a list or characters of a string.",
        [](Context&, const BoundArgs& a, SourcePos at) {
            if (const auto* s = std::get_if<std::string>(&a[0]->v)) return number_value(static_cast<double>(s->size()));
            return number_value(static_cast<double>(list(a[0], "x", at).size()));
        });
    add("vec", K::Math, {req("x"), req("y"), req("z")}, "The list [x, y, z].",
        [](Context&, const BoundArgs& a, SourcePos at) {
            return vec_value({num(a[0], "x", at), num(a[1], "y", at), num(a[2], "z", at)});
        });
    add("norm", K::Math, {req("v")}, "Euclidean length of a numeric list.",
        [](Context& ctx, const BoundArgs& a, SourcePos at) {
            const auto xs = numbers(list(a[0], "v", at), "v", at);
            ctx.charge(xs.size());
            double s = 0.0;
            for (double x : xs) s += x * x;
            return number_value(finite(std::sqrt(s), at, "norm"));
        });
    add("dist", K::Math, {req("a"), req("b")}, "|a - b| for 3-vectors (waypoint lists use their first 3 entries).",
        [](Context&, const BoundArgs& a, SourcePos at) {
            auto first3 = [at](const std::optional<Value>& v, const char* name) {
                const auto xs = numbers(list(v, name, at), name, at);
                if (xs.size() < 3) fail(RuntimeErrorKind::InvalidArgument, at, std::string("'") + name + "' needs 3 entries");
                return Vec3(xs[0], xs[1], xs[2]);
            };
            return number_value(finite((first3(a[0], "a") - first3(a[1], "b")).norm(), at, "dist"));
        });
    add("normalize", K::Math, {req("v")}, "v / |v| for a 3-vector; DivisionByZero when |v| = 0.",
        [](Context&, const BoundArgs& a, SourcePos at) {
            const Vec3 v = vec3(a[0], "v", at);
            const double n = v.norm();
            if (n == 0.0) fail(RuntimeErrorKind::DivisionByZero, at, "normalize of a zero vector");
            return vec_value(Vec3(v / n));
        });
    add("dot", K::Math, {req("a"), req("b")}, "a . b for 3-vectors.",
        [](Context&, const BoundArgs& a, SourcePos at) { return number_value(vec3(a[0], "a", at).dot(vec3(a[1], "b", at))); });
    add("cross", K::Math, {req("a"), req("b")}, "a x b for 3-vectors.",
        [](Context&, const BoundArgs& a, SourcePos at) { return vec_value(Vec3(vec3(a[0], "a", at).cross(vec3(a[1], "b", at)))); });
    add("lerp", K::Math, {req("a"), req("b"), req("t")}, "a + t (b - a), elementwise for equal-length numeric lists.",
        [](Context&, const BoundArgs& a, SourcePos at) {
            const double t = num(a[2], "t", at);
            if (std::holds_alternative<double>(a[0]->v)) {
                const double x = num(a[0], "a", at), y = num(a[1], "b", at);
                return number_value(finite(x + t * (y - x), at, "lerp"));
            }
            const auto xs = numbers(list(a[0], "a", at), "a", at);
            const auto ys = numbers(list(a[1], "b", at), "b", at);
            if (xs.size() != ys.size()) fail(RuntimeErrorKind::InvalidArgument, at, "'a' and 'b' differ in length");
            List out;
            for (std::size_t i = 0; i < xs.size(); ++i) out.push_back(Value{finite(xs[i] + t * (ys[i] - xs[i]), at, "lerp")});
            return Value{std::move(out)};
        });
    add("append", K::Math, {req("list"), req("value")}, "A copy of `list` with `value` appended.",
        [](Context& ctx, const BoundArgs& a, SourcePos at) {
            List out = list(a[0], "list", at);
            if (out.size() >= kMaxListLength) fail(RuntimeErrorKind::OutputTooLarge, at, "list too long");
            ctx.charge(out.size());
            out.push_back(*a[1]);
            Value v{std::move(out)};
            if (nesting(v) > kMaxValueNesting) fail(RuntimeErrorKind::InvalidArgument, at, "lists nest too deeply");
            return v;
        });
    add("noise", K::Math, {req("seed"), opt("index", "0"), opt("scale", "1")},
        "scale (2u - 1) with u = (splitmix64(splitmix64(seed) xor index) >> 11) 2^-53; "
        "a pure function of (seed, index), uniform on [-scale, scale).",
        [](Context&, const BoundArgs& a, SourcePos at) {
            const long long seed = integer(a[0], "seed", at);
            const long long index = integer(a[1], "index", at);
            const double scale = num(a[2], "scale", at);
            const std::uint64_t bits = splitmix64(splitmix64(static_cast<std::uint64_t>(seed)) ^ static_cast<std::uint64_t>(index));
            const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
            return number_value(scale * (2.0 * u - 1.0));
        });
    return t;
}

const std::vector<Entry>& table() {
    static const std::vector<Entry> t = make_table();
    return t;
}

}  // namespace

Value call_builtin(Context& ctx, const BuiltinInfo& info, const BoundArgs& args, SourcePos at) {
    for (const Entry& e : table()) {
        if (e.info.name == info.name) return e.fn(ctx, args, at);
    }
    fail(RuntimeErrorKind::InvalidArgument, at, "unknown builtin " + info.name);
}

Value default_value(const BuiltinParam& p) {
    const auto toks = lex(p.default_value);
    const Token& t = toks.front();
    if (t.kind == Tok::Number) return Value{t.number};
    if (t.kind == Tok::String) return Value{t.text};
    return Value{t.text == "true"};
}

}  // namespace detail

const std::vector<BuiltinInfo>& builtin_transforms() {
    static const std::vector<BuiltinInfo> infos = [] {
        std::vector<BuiltinInfo> out;
        for (const auto& e : detail::table()) out.push_back(e.info);
        return out;
    }();
    return infos;
}

const BuiltinInfo* find_builtin(std::string_view name) {
    for (const BuiltinInfo& b : builtin_transforms()) {
        if (b.name == name) return &b;
    }
    return nullptr;
}

}  // namespace ovita::policy
