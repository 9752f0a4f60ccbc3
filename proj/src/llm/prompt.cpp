#include "ovita/llm/gateway.hpp"

#include "ovita/policy/catalog.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <stdexcept>

namespace ovita::assets {
std::string_view find(std::string_view name);
}

namespace ovita::llm {

namespace {

std::string num(double x) {
    std::array<char, 32> buf{};
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), r.ptr);
}

std::string vec(const Vec3& p) { return "(" + num(p.x()) + ", " + num(p.y()) + ", " + num(p.z()) + ")"; }

std::string trim_newlines(std::string_view s) {
    while (!s.empty() && s.back() == '\n') s.remove_suffix(1);
    return std::string(s);
}

std::string asset(std::string_view name) {
    const std::string_view t = assets::find(name);
    if (t.empty()) throw std::logic_error("missing prompt asset " + std::string(name));
    return std::string(t);
}

// Single pass: text substituted into a placeholder is never rescanned.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        const std::size_t open = tmpl.find("{{", i);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(i));
            break;
        }
        const std::size_t close = tmpl.find("}}", open);
        if (close == std::string_view::npos) throw std::logic_error("unterminated placeholder in prompt template");
        out.append(tmpl.substr(i, open - i));
        const std::string key(tmpl.substr(open + 2, close - open - 2));
        const auto it = values.find(key);
        if (it == values.end()) throw std::logic_error("unknown placeholder {{" + key + "}}");
        out += it->second;
        i = close + 2;
    }
    return out;
}

std::string object_table(const Scene& scene) {
    if (scene.objects().empty()) return "no objects detected";
    std::string out;
    for (const SceneObject& o : scene.objects()) {
        if (!out.empty()) out += '\n';
        out += "- " + o.label + ": center " + vec(o.center) + ", dimensions " + vec(o.dimensions);
        for (const auto& [k, v] : o.properties) out += ", " + k + ": " + v;
    }
    return out;
}

std::string trajectory_summary(const Trajectory& t) {
    Vec3 lo = t[0].position(), hi = lo;
    double vmin = t[0].v, vmax = t[0].v;
    for (const Waypoint& w : t) {
        lo = lo.cwiseMin(w.position());
        hi = hi.cwiseMax(w.position());
        vmin = std::min(vmin, w.v);
        vmax = std::max(vmax, w.v);
    }
    std::string out = std::to_string(t.size()) + " waypoints in frame " + t.frame() + "\n";
    out += "start: " + vec(t[0].position()) + ", speed " + num(t[0].v) + "\n";
    const Waypoint& g = t[t.size() - 1];
    out += "goal: " + vec(g.position()) + ", speed " + num(g.v) + "\n";
    out += "bounding box: x [" + num(lo.x()) + ", " + num(hi.x()) + "], y [" + num(lo.y()) + ", " + num(hi.y()) +
           "], z [" + num(lo.z()) + ", " + num(hi.z()) + "]\n";
    out += "speed range: [" + num(vmin) + ", " + num(vmax) + "]\n";
    out += "The program reads the full waypoint list with get_trajectory().";
    return out;
}

std::string function_definitions() {
    std::string out;
    for (const auto kind : {policy::BuiltinKind::Query, policy::BuiltinKind::Transform, policy::BuiltinKind::Math}) {
        out += (out.empty() ? "" : "\n") + std::string("### ") +
               (kind == policy::BuiltinKind::Query       ? "Reading the trajectory and the scene"
                : kind == policy::BuiltinKind::Transform ? "Transforms (edit the working trajectory)"
                                                         : "Math helpers") +
               "\n";
        for (const auto& b : policy::builtin_transforms()) {
            if (b.kind != kind) continue;
            out += "- " + b.name + "(";
            for (std::size_t i = 0; i < b.params.size(); ++i) {
                const auto& p = b.params[i];
                if (i) out += ", ";
                out += p.name;
                if (!p.required) out += p.default_value.empty() ? "?" : "=" + p.default_value;
            }
            out += "): " + b.math + "\n";
        }
    }
    return trim_newlines(out);
}

}  // namespace

std::string_view template_text(std::string_view name) { return assets::find(name); }

std::string sha256_hex(const std::string& data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xF];
    }
    return out;
}

std::string prompt_hash(const std::string& system, const std::string& user) {
    return sha256_hex(system + "\n\n" + user);
}

std::string prompt_hash(const GroundedPrompt& p) { return prompt_hash(p.system, p.user); }

GroundedPrompt ground(const std::string& instruction, const Scene& scene, const Trajectory& trajectory,
                      GroundFlags flags) {
    if (std::all_of(instruction.begin(), instruction.end(), [](unsigned char c) { return std::isspace(c); })) {
        throw EmptyInstruction();
    }
    GroundedPrompt p;
    PromptParts& parts = p.parts;
    parts.instruction = instruction;
    parts.scene_description = scene.description().value_or("none provided");
    parts.object_table = object_table(scene);
    parts.trajectory_summary = trajectory_summary(trajectory);
    parts.coordinate_system = trim_newlines(asset("coordinate_system.txt"));
    parts.trajectory_rules = trim_newlines(asset("trajectory_rules.txt"));
    parts.function_definitions = function_definitions();
    if (flags.include_examples) parts.examples = asset("examples.txt");

    p.system = render(asset("system.txt"), {{"coordinate_system", parts.coordinate_system},
                                            {"trajectory_rules", parts.trajectory_rules},
                                            {"function_definitions", parts.function_definitions},
                                            {"examples", parts.examples}});
    p.user = render(asset("user.txt"), {{"instruction", parts.instruction},
                                        {"scene_description", parts.scene_description},
                                        {"object_table", parts.object_table},
                                        {"trajectory_summary", parts.trajectory_summary}});
    return p;
}

GroundedPrompt explain_prompt(const policy::PolicyProgram& program, const std::string& plan) {
    std::string params;
    for (const auto& [name, value] : program.params) {
        if (!params.empty()) params += '\n';
        params += "- " + name + " = " + policy::to_string(value);
    }
    if (params.empty()) params = "none extracted";
    GroundedPrompt p;
    p.system = asset("explain_system.txt");
    p.user = render(asset("explain_user.txt"), {{"plan", plan.empty() ? "none given" : plan},
                                                {"code", trim_newlines(program.source)},
                                                {"params", params}});
    p.parts.instruction = "explain";
    return p;
}

}  // namespace ovita::llm
