#include "ovita/core/json_io.hpp"

#include "ovita/core/error.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace ovita::io {

std::string join_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

std::string index_path(const std::string& base, std::size_t i) {
    return base + "[" + std::to_string(i) + "]";
}

void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw SchemaViolation(path.empty() ? "$" : path, "expected an object");
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
    require_object(obj, path);
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaViolation(join_path(path, key), "missing required field");
    return *it;
}

double require_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw SchemaViolation(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw SchemaViolation(path, "expected a finite number");
    return v;
}

bool require_bool(const json& j, const std::string& path) {
    if (!j.is_boolean()) throw SchemaViolation(path, "expected a boolean");
    return j.get<bool>();
}

std::string require_string(const json& j, const std::string& path) {
    if (!j.is_string()) throw SchemaViolation(path, "expected a string");
    return j.get<std::string>();
}

Vec3 require_vec3(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3) throw SchemaViolation(path, "expected 3 values");
    return {require_number(j[0], index_path(path, 0)), require_number(j[1], index_path(path, 1)),
            require_number(j[2], index_path(path, 2))};
}

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& path) {
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw SchemaViolation(join_path(path, key), "unknown field");
    }
}

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json to_json(const Trajectory& t) {
    json wps = json::array();
    for (const auto& w : t) wps.push_back(json::array({w.x, w.y, w.z, w.v}));
    return {{"frame", t.frame()}, {"waypoints", std::move(wps)}};
}

json to_json(const SceneObject& o) {
    json props = json::object();
    for (const auto& [k, v] : o.properties) props[k] = v;
    return {{"label", o.label},
            {"center", to_json(o.center)},
            {"dimensions", to_json(o.dimensions)},
            {"properties", std::move(props)}};
}

json to_json(const Scene& s) {
    json objs = json::array();
    for (const auto& o : s.objects()) objs.push_back(to_json(o));
    return {{"description", s.description() ? json(*s.description()) : json(nullptr)},
            {"objects", std::move(objs)}};
}

json to_json(const WorkspaceSpec& w) {
    return std::visit(
        [](const auto& ws) -> json {
            using T = std::decay_t<decltype(ws)>;
            if constexpr (std::is_same_v<T, CuboidWorkspace>) {
                return {{"type", "cuboid"}, {"min", to_json(ws.min)}, {"max", to_json(ws.max)}};
            } else if constexpr (std::is_same_v<T, SphereWorkspace>) {
                return {{"type", "sphere"},
                        {"center", to_json(ws.center)},
                        {"r_min", ws.r_min},
                        {"r_max", ws.r_max}};
            } else {
                return {{"type", "unbounded"}};
            }
        },
        w);
}

json to_json(const RobotProfile& p) {
    return {{"workspace", to_json(p.workspace)},
            {"v_max", p.v_max},
            {"delta", p.delta},
            {"fix_start", p.fix_start},
            {"fix_goal", p.fix_goal},
            {"enforce_constraints", p.enforce_constraints}};
}

Trajectory trajectory_from_json(const json& j, const std::string& path) {
    require_object(j, path);
    reject_unknown_keys(j, {"frame", "waypoints"}, path);
    std::string frame = "world";
    if (auto it = j.find("frame"); it != j.end()) frame = require_string(*it, join_path(path, "frame"));
    const std::string wp_path = join_path(path, "waypoints");
    const json& wps = require(j, "waypoints", path);
    if (!wps.is_array()) throw SchemaViolation(wp_path, "expected an array");
    if (wps.size() < 2) throw SchemaViolation(wp_path, "expected at least 2 waypoints");
    std::vector<Waypoint> out;
    out.reserve(wps.size());
    for (std::size_t k = 0; k < wps.size(); ++k) {
        const std::string p = index_path(wp_path, k);
        const json& w = wps[k];
        if (!w.is_array() || w.size() != 4) throw SchemaViolation(p, "expected 4 values");
        Waypoint wp{require_number(w[0], index_path(p, 0)), require_number(w[1], index_path(p, 1)),
                    require_number(w[2], index_path(p, 2)), require_number(w[3], index_path(p, 3))};
        if (wp.v < 0.0) throw SchemaViolation(index_path(p, 3), "speed must be non-negative");
        out.push_back(wp);
    }
    return Trajectory(std::move(out), std::move(frame));
}

Scene scene_from_json(const json& j, const std::string& path) {
    require_object(j, path);
    reject_unknown_keys(j, {"description", "objects"}, path);
    std::optional<std::string> description;
    if (auto it = j.find("description"); it != j.end() && !it->is_null()) {
        description = require_string(*it, join_path(path, "description"));
    }
    std::vector<SceneObject> objects;
    const std::string objs_path = join_path(path, "objects");
    if (auto it = j.find("objects"); it != j.end()) {
        if (!it->is_array()) throw SchemaViolation(objs_path, "expected an array");
        for (std::size_t k = 0; k < it->size(); ++k) {
            const std::string p = index_path(objs_path, k);
            const json& o = (*it)[k];
            require_object(o, p);
            reject_unknown_keys(o, {"label", "center", "dimensions", "properties"}, p);
            SceneObject obj;
            obj.label = require_string(require(o, "label", p), join_path(p, "label"));
            if (obj.label.empty()) throw SchemaViolation(join_path(p, "label"), "must be non-empty");
            obj.center = require_vec3(require(o, "center", p), join_path(p, "center"));
            obj.dimensions = require_vec3(require(o, "dimensions", p), join_path(p, "dimensions"));
            if ((obj.dimensions.array() <= 0.0).any()) {
                throw SchemaViolation(join_path(p, "dimensions"), "must be strictly positive");
            }
            if (auto pr = o.find("properties"); pr != o.end() && !pr->is_null()) {
                require_object(*pr, join_path(p, "properties"));
                for (const auto& [k2, v2] : pr->items()) {
                    const std::string pp = join_path(join_path(p, "properties"), k2);
                    obj.properties[k2] = v2.is_string() ? v2.get<std::string>() : v2.dump();
                }
            }
            for (std::size_t q = 0; q < objects.size(); ++q) {
                if (objects[q].label == obj.label) {
                    throw SchemaViolation(join_path(p, "label"), "duplicate label '" + obj.label + "'");
                }
            }
            objects.push_back(std::move(obj));
        }
    }
    return Scene(std::move(objects), std::move(description));
}

WorkspaceSpec workspace_from_json(const json& j, const std::string& path) {
    require_object(j, path);
    const std::string type = require_string(require(j, "type", path), join_path(path, "type"));
    if (type == "cuboid") {
        reject_unknown_keys(j, {"type", "min", "max"}, path);
        CuboidWorkspace c{require_vec3(require(j, "min", path), join_path(path, "min")),
                          require_vec3(require(j, "max", path), join_path(path, "max"))};
        if (!(c.min.array() < c.max.array()).all()) {
            throw SchemaViolation(path, "cuboid requires min < max component-wise");
        }
        return c;
    }
    if (type == "sphere") {
        reject_unknown_keys(j, {"type", "center", "r_min", "r_max"}, path);
        SphereWorkspace s;
        s.center = require_vec3(require(j, "center", path), join_path(path, "center"));
        if (auto it = j.find("r_min"); it != j.end()) s.r_min = require_number(*it, join_path(path, "r_min"));
        s.r_max = require_number(require(j, "r_max", path), join_path(path, "r_max"));
        if (!(s.r_min >= 0.0 && s.r_max > s.r_min)) {
            throw SchemaViolation(path, "sphere requires 0 <= r_min < r_max");
        }
        return s;
    }
    if (type == "unbounded") {
        reject_unknown_keys(j, {"type"}, path);
        return UnboundedWorkspace{};
    }
    throw SchemaViolation(join_path(path, "type"), "expected one of cuboid, sphere, unbounded");
}

RobotProfile profile_from_json(const json& j, const std::string& path) {
    require_object(j, path);
    reject_unknown_keys(j, {"workspace", "v_max", "delta", "fix_start", "fix_goal", "enforce_constraints"},
                        path);
    RobotProfile p;
    if (auto it = j.find("workspace"); it != j.end()) {
        p.workspace = workspace_from_json(*it, join_path(path, "workspace"));
    }
    p.v_max = require_number(require(j, "v_max", path), join_path(path, "v_max"));
    if (!(p.v_max > 0.0)) throw SchemaViolation(join_path(path, "v_max"), "must be > 0");
    if (auto it = j.find("delta"); it != j.end()) {
        p.delta = require_number(*it, join_path(path, "delta"));
        if (p.delta < 0.0) throw SchemaViolation(join_path(path, "delta"), "must be >= 0");
    }
    if (auto it = j.find("fix_start"); it != j.end()) p.fix_start = require_bool(*it, join_path(path, "fix_start"));
    if (auto it = j.find("fix_goal"); it != j.end()) p.fix_goal = require_bool(*it, join_path(path, "fix_goal"));
    if (auto it = j.find("enforce_constraints"); it != j.end()) {
        p.enforce_constraints = require_bool(*it, join_path(path, "enforce_constraints"));
    }
    return p;
}

json read_json_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw SchemaViolation("$", std::string("invalid JSON in ") + file.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& file, const json& j) {
    if (file.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(file.parent_path(), ec);
    }
    const auto tmp = std::filesystem::path(file.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << j.dump(2) << '\n';
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, file, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " to " + file.string() + ": " + ec.message());
}

}  // namespace ovita::io
