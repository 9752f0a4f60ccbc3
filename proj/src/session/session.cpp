#include "ovita/session/session.hpp"

#include "ovita/core/json_io.hpp"
#include "ovita/policy/parser.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <random>

namespace ovita::session {

using nlohmann::json;

namespace {

constexpr const char* kChainSeparator = " Additionally: ";

bool same_bits(const Trajectory& a, const Trajectory& b) {
    if (a.size() != b.size() || a.frame() != b.frame()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Waypoint& p = a[i];
        const Waypoint& q = b[i];
        for (auto [u, v] : {std::pair{p.x, q.x}, {p.y, q.y}, {p.z, q.z}, {p.v, q.v}}) {
            if (std::bit_cast<std::uint64_t>(u) != std::bit_cast<std::uint64_t>(v)) return false;
        }
    }
    return true;
}

TurnError error_from(Stage stage, const Error& e) {
    TurnError out{stage, e.code(), e.what(), {}, {}, {}};
    if (const auto* s = dynamic_cast<const policy::SyntaxError*>(&e)) {
        out.line = s->line();
        out.column = s->column();
    } else if (const auto* d = dynamic_cast<const policy::DisallowedConstruct*>(&e)) {
        out.line = d->line();
        out.column = d->column();
    } else if (const auto* r = dynamic_cast<const policy::RuntimeError*>(&e)) {
        out.line = r->location().line;
        out.column = r->location().column;
        out.kind = policy::to_string(r->kind());
    }
    return out;
}

void fail(Turn& t, TurnError e) {
    t.error = std::move(e);
    t.output = t.input;
}

json param_json(const policy::ParamValue& v) {
    return std::visit([](const auto& x) { return json(x); }, v);
}

qp::Status qp_status_from_string(const std::string& s, const std::string& path) {
    for (auto st : {qp::Status::Optimal, qp::Status::MaxIterations, qp::Status::Infeasible}) {
        if (qp::to_string(st) == s) return st;
    }
    throw SchemaViolation(path, "unknown solver status \"" + s + "\"");
}

template <class E>
E enum_from(const std::string& s, std::initializer_list<E> values, const std::string& path) {
    for (E v : values) {
        if (to_string(v) == s) return v;
    }
    throw SchemaViolation(path, "unknown value \"" + s + "\"");
}

json error_json(const TurnError& e) {
    json j = {{"stage", to_string(e.stage)}, {"code", e.code}, {"message", e.message}};
    if (e.line) j["line"] = *e.line;
    if (e.column) j["column"] = *e.column;
    if (e.kind) j["kind"] = *e.kind;
    return j;
}

json csm_summary(const csm::CsmReport& r) {
    return {{"status", qp::to_string(r.status)},
            {"linear_violation_max", r.linear_violation_max},
            {"true_violation_max", r.true_violation_max},
            {"deviation_cost", r.deviation_cost},
            {"smoothness_cost", r.smoothness_cost},
            {"iterations", r.iterations},
            {"speeds_snapped", r.speeds_snapped}};
}

const json& field(const json& j, const char* key, const std::string& path) { return io::require(j, key, path); }

std::optional<json> optional_field(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return std::optional<json>(std::in_place, *it);
}

std::size_t require_count(const json& j, const std::string& path) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
        throw SchemaViolation(path, "expected a non-negative integer");
    }
    return j.get<std::size_t>();
}

int require_int(const json& j, const std::string& path) {
    if (!j.is_number_integer()) throw SchemaViolation(path, "expected an integer");
    return j.get<int>();
}

csm::CsmReport report_from_json(const json& j, const std::string& path) {
    io::require_object(j, path);
    auto num = [&](const json& o, const std::string& p, const char* key) {
        return io::require_number(field(o, key, p), io::join_path(p, key));
    };
    const std::string kp = io::join_path(path, "kkt");
    const json& kkt = field(j, "kkt", path);
    return csm::CsmReport{
        io::trajectory_from_json(field(j, "solution", path), io::join_path(path, "solution")),
        qp_status_from_string(io::require_string(field(j, "status", path), io::join_path(path, "status")),
                              io::join_path(path, "status")),
        num(j, path, "linear_violation_max"),
        num(j, path, "true_violation_max"),
        num(j, path, "deviation_cost"),
        num(j, path, "smoothness_cost"),
        qp::KktResiduals{num(kkt, kp, "primal"), num(kkt, kp, "dual"), num(kkt, kp, "comp")},
        require_int(field(j, "iterations", path), io::join_path(path, "iterations")),
        require_count(field(j, "speeds_snapped", path), io::join_path(path, "speeds_snapped"))};
}

}  // namespace

std::string to_string(Context c) { return c == Context::Original ? "original" : "current"; }

Context context_from_string(const std::string& s) {
    if (s == "original") return Context::Original;
    if (s == "current") return Context::Current;
    throw InvalidArgument("context must be \"original\" or \"current\", got \"" + s + "\"");
}

std::string to_string(Status s) { return s == Status::Active ? "active" : "closed"; }

std::string to_string(Stage s) {
    switch (s) {
        case Stage::Gateway: return "gateway";
        case Stage::Response: return "response";
        case Stage::Parse: return "parse";
        case Stage::Execute: return "execute";
        case Stage::Csm: return "csm";
    }
    return "unknown";
}

std::string new_uuid() {
    static thread_local std::mt19937_64 gen{std::random_device{}()};
    std::uint64_t hi = gen(), lo = gen();
    hi = (hi & ~0xF000ULL) | 0x4000ULL;                   // version 4
    lo = (lo & ~(0xC0ULL << 56)) | (0x80ULL << 56);       // RFC 4122 variant
    char buf[37];
    std::snprintf(buf, sizeof buf, "%08x-%04x-%04x-%04x-%012llx", static_cast<unsigned>(hi >> 32),
                  static_cast<unsigned>((hi >> 16) & 0xFFFF), static_cast<unsigned>(hi & 0xFFFF),
                  static_cast<unsigned>(lo >> 48), static_cast<unsigned long long>(lo & 0xFFFFFFFFFFFFULL));
    return buf;
}

Session start(Trajectory base, Scene scene, RobotProfile profile, csm::CsmConfig csm, llm::GroundFlags ground,
              std::string id) {
    validate(profile);
    csm::validate(csm);
    Session s(std::move(id), std::move(base), std::move(scene), profile);
    s.csm = std::move(csm);
    s.ground = ground;
    return s;
}

std::string effective_instruction(const Session& s, const std::string& instruction, Context context) {
    if (context == Context::Current) return instruction;
    std::string out;
    for (const Turn& t : s.turns) {
        if (t.context != Context::Original) continue;
        out += t.instruction;
        out += kChainSeparator;
    }
    return out + instruction;
}

const Turn& adapt(Session& s, const std::string& instruction, Context context, llm::Backend& backend) {
    if (s.status == Status::Closed) throw SessionClosed(s.id);
    if (s.turns.empty() && context != Context::Original) throw FirstTurnMustBeOriginal();

    Turn t(context == Context::Original ? s.base : s.current());
    t.index = s.turns.size();
    t.instruction = instruction;
    t.context = context;
    t.effective_instruction = effective_instruction(s, instruction, context);

    const llm::GroundedPrompt prompt = llm::ground(t.effective_instruction, s.scene, t.input, s.ground);
    t.prompt_sha256 = llm::prompt_hash(prompt);

    [&] {
        std::string raw;
        try {
            raw = backend.complete_raw(prompt);
        } catch (const Error& e) {
            return fail(t, error_from(Stage::Gateway, e));
        }
        t.response = llm::parse_response(raw);
        if (!t.response->parse_ok) {
            return fail(t, {Stage::Response, "response_unparseable",
                            "model output holds no JSON object with non-empty \"plan\" and \"code\"", {}, {}, {}});
        }
        try {
            t.program = policy::parse(t.response->code);
        } catch (const Error& e) {
            return fail(t, error_from(Stage::Parse, e));
        }
        try {
            t.policy_result = policy::execute(*t.program, t.input, s.scene);
        } catch (const Error& e) {
            return fail(t, error_from(Stage::Execute, e));
        }
        if (!s.profile.enforce_constraints) {
            t.output = t.policy_result->trajectory;
            return;
        }
        try {
            t.csm_report = csm::enforce(t.policy_result->trajectory, s.scene, s.profile, s.csm);
        } catch (const Error& e) {
            return fail(t, error_from(Stage::Csm, e));
        }
        if (t.csm_report->status != qp::Status::Optimal) {
            return fail(t, {Stage::Csm, "csm_not_optimal",
                            "constraint solve ended " + qp::to_string(t.csm_report->status) +
                                "; the policy output is kept in policy_result but not adopted",
                            {}, {}, {}});
        }
        t.output = t.csm_report->solution;
    }();

    s.turns.push_back(std::move(t));
    return s.turns.back();
}

void close(Session& s) { s.status = Status::Closed; }

const std::string& explain(Session& s, std::size_t k, llm::Backend& backend) {
    if (k >= s.turns.size()) throw TurnNotFound(k, s.turns.size());
    Turn& t = s.turns[k];
    if (!t.explanation) {
        if (!t.program) throw InvalidArgument("turn " + std::to_string(k) + " has no program to explain");
        t.explanation = llm::explain(*t.program, t.response ? t.response->plan : "", backend);
    }
    return *t.explanation;
}

json visualize_payload(const Session& s, std::size_t k) {
    if (k >= s.turns.size()) throw TurnNotFound(k, s.turns.size());
    const Turn& t = s.turns[k];
    json params = json::object();
    if (t.program) {
        for (const auto& [name, v] : t.program->params) params[name] = param_json(v);
    }
    json trace = json::array();
    if (t.policy_result) {
        for (const auto& e : t.policy_result->trace) trace.push_back({{"step", e.step}, {"description", e.description}});
    }
    json objects = io::to_json(s.scene)["objects"];
    return {{"session_id", s.id},
            {"turn", k},
            {"ok", t.ok()},
            {"instruction", t.instruction},
            {"context", to_string(t.context)},
            {"effective_instruction", t.effective_instruction},
            {"initial", io::to_json(s.base)},
            {"input", io::to_json(t.input)},
            {"adapted", io::to_json(t.output)},
            {"plan", t.response ? json(t.response->plan) : json(nullptr)},
            {"code", t.response && t.response->parse_ok ? json(t.response->code) : json(nullptr)},
            {"params", params},
            {"trace", trace},
            {"explanation", t.explanation ? json(*t.explanation) : json(nullptr)},
            {"csm", t.csm_report ? csm_summary(*t.csm_report) : json(nullptr)},
            {"error", t.error ? error_json(*t.error) : json(nullptr)},
            {"objects", objects}};
}

json emit_plot_data(const json& bundle) {
    auto split = [](const json& traj, const std::string& path) {
        const Trajectory t = io::trajectory_from_json(traj, path);
        json xyz = json::array(), v = json::array();
        for (const Waypoint& w : t) {
            xyz.push_back({w.x, w.y, w.z});
            v.push_back(w.v);
        }
        return std::pair{xyz, v};
    };
    io::require_object(bundle, "");
    const auto [initial, speeds_initial] = split(io::require(bundle, "initial", ""), "initial");
    const auto [adapted, speeds_adapted] = split(io::require(bundle, "adapted", ""), "adapted");
    json objects = json::array();
    if (const auto it = bundle.find("objects"); it != bundle.end()) {
        if (!it->is_array()) throw SchemaViolation("objects", "expected an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const json& o = (*it)[i];
            const std::string p = io::index_path("objects", i);
            io::require_object(o, p);
            objects.push_back({{"label", io::require_string(io::require(o, "label", p), io::join_path(p, "label"))},
                               {"center", io::require(o, "center", p)},
                               {"dimensions", io::require(o, "dimensions", p)}});
        }
    }
    return {{"initial", initial},
            {"adapted", adapted},
            {"speeds_initial", speeds_initial},
            {"speeds_adapted", speeds_adapted},
            {"objects", objects}};
}

Session replay(const Session& recorded, llm::Backend& backend) {
    Session fresh = start(recorded.base, recorded.scene, recorded.profile, recorded.csm, recorded.ground, recorded.id);
    for (const Turn& t : recorded.turns) adapt(fresh, t.instruction, t.context, backend);
    return fresh;
}

std::vector<Mismatch> diff(const Session& expected, const Session& actual) {
    std::vector<Mismatch> out;
    if (expected.turns.size() != actual.turns.size()) {
        out.push_back({0, "turns",
                       std::to_string(expected.turns.size()) + " recorded vs " +
                           std::to_string(actual.turns.size()) + " replayed"});
    }
    const std::size_t n = std::min(expected.turns.size(), actual.turns.size());
    for (std::size_t k = 0; k < n; ++k) {
        const Turn& a = expected.turns[k];
        const Turn& b = actual.turns[k];
        if (a.effective_instruction != b.effective_instruction) {
            out.push_back({k, "effective_instruction", "\"" + a.effective_instruction + "\" vs \"" +
                                                            b.effective_instruction + "\""});
        }
        if (a.prompt_sha256 != b.prompt_sha256) {
            out.push_back({k, "prompt_sha256", a.prompt_sha256 + " vs " + b.prompt_sha256});
        }
        if (!same_bits(a.input, b.input)) out.push_back({k, "input", "input trajectories differ"});
        const std::string ea = a.error ? to_string(a.error->stage) + "/" + a.error->code : "none";
        const std::string eb = b.error ? to_string(b.error->stage) + "/" + b.error->code : "none";
        if (ea != eb) out.push_back({k, "error", ea + " vs " + eb});
        if (!same_bits(a.output, b.output)) out.push_back({k, "output", "adapted trajectories differ"});
    }
    return out;
}

double ExecStats::executable_rate() const {
    const std::size_t answered = turns - gateway_failures;
    if (answered == 0) return 0.0;
    return static_cast<double>(answered - response_failures - parse_failures - execute_failures) /
           static_cast<double>(answered);
}

ExecStats& ExecStats::operator+=(const ExecStats& o) {
    turns += o.turns;
    gateway_failures += o.gateway_failures;
    response_failures += o.response_failures;
    parse_failures += o.parse_failures;
    execute_failures += o.execute_failures;
    csm_failures += o.csm_failures;
    succeeded += o.succeeded;
    return *this;
}

ExecStats executability(const std::vector<Turn>& turns) {
    ExecStats s;
    for (const Turn& t : turns) {
        ++s.turns;
        if (!t.error) {
            ++s.succeeded;
            continue;
        }
        switch (t.error->stage) {
            case Stage::Gateway: ++s.gateway_failures; break;
            case Stage::Response: ++s.response_failures; break;
            case Stage::Parse: ++s.parse_failures; break;
            case Stage::Execute: ++s.execute_failures; break;
            case Stage::Csm: ++s.csm_failures; break;
        }
    }
    return s;
}

ExecStats executability(const Session& s) { return executability(s.turns); }

json to_json(const ExecStats& s) {
    return {{"turns", s.turns},
            {"gateway_failures", s.gateway_failures},
            {"response_failures", s.response_failures},
            {"parse_failures", s.parse_failures},
            {"execute_failures", s.execute_failures},
            {"csm_failures", s.csm_failures},
            {"succeeded", s.succeeded},
            {"executable_rate", s.executable_rate()}};
}

json to_json(const Turn& t) {
    json j = {{"index", t.index},
              {"instruction", t.instruction},
              {"context", to_string(t.context)},
              {"effective_instruction", t.effective_instruction},
              {"prompt_sha256", t.prompt_sha256},
              {"input", io::to_json(t.input)},
              {"output", io::to_json(t.output)},
              {"response", nullptr},
              {"program", nullptr},
              {"policy_result", nullptr},
              {"csm_report", nullptr},
              {"error", t.error ? error_json(*t.error) : json(nullptr)},
              {"explanation", t.explanation ? json(*t.explanation) : json(nullptr)}};
    if (t.response) {
        j["response"] = {{"raw", t.response->raw},
                         {"plan", t.response->plan},
                         {"code", t.response->code},
                         {"parse_ok", t.response->parse_ok}};
    }
    if (t.program) {
        json params = json::object();
        for (const auto& [name, v] : t.program->params) params[name] = param_json(v);
        j["program"] = {{"source", t.program->source}, {"params", params}};
    }
    if (t.policy_result) {
        json trace = json::array();
        for (const auto& e : t.policy_result->trace) trace.push_back({{"step", e.step}, {"description", e.description}});
        j["policy_result"] = {{"trajectory", io::to_json(t.policy_result->trajectory)},
                              {"trace", trace},
                              {"steps_used", t.policy_result->steps_used}};
    }
    if (t.csm_report) j["csm_report"] = csm::to_json(*t.csm_report);
    return j;
}

json to_json(const Session& s) {
    json turns = json::array();
    for (const Turn& t : s.turns) turns.push_back(to_json(t));
    return {{"id", s.id},
            {"status", to_string(s.status)},
            {"base_trajectory", io::to_json(s.base)},
            {"scene", io::to_json(s.scene)},
            {"profile", io::to_json(s.profile)},
            {"csm", csm::to_json(s.csm)},
            {"include_examples", s.ground.include_examples},
            {"turns", turns}};
}

Turn turn_from_json(const json& j, const std::string& path) {
    io::require_object(j, path);
    auto at = [&](const char* key) { return io::join_path(path, key); };
    auto str = [&](const char* key) { return io::require_string(field(j, key, path), at(key)); };
    Turn t(io::trajectory_from_json(field(j, "input", path), at("input")));
    t.index = require_count(field(j, "index", path), at("index"));
    t.instruction = str("instruction");
    try {
        t.context = context_from_string(str("context"));
    } catch (const InvalidArgument& e) {
        throw SchemaViolation(at("context"), e.what());
    }
    t.effective_instruction = str("effective_instruction");
    t.prompt_sha256 = str("prompt_sha256");
    t.output = io::trajectory_from_json(field(j, "output", path), at("output"));
    if (const auto r = optional_field(j, "response")) {
        const std::string p = at("response");
        io::require_object(*r, p);
        llm::ModelResponse m;
        m.raw = io::require_string(field(*r, "raw", p), io::join_path(p, "raw"));
        m.plan = io::require_string(field(*r, "plan", p), io::join_path(p, "plan"));
        m.code = io::require_string(field(*r, "code", p), io::join_path(p, "code"));
        m.parse_ok = io::require_bool(field(*r, "parse_ok", p), io::join_path(p, "parse_ok"));
        t.response = m;
    }
    if (const auto prog = optional_field(j, "program")) {
        const std::string p = at("program");
        io::require_object(*prog, p);
        const std::string source = io::require_string(field(*prog, "source", p), io::join_path(p, "source"));
        try {
            t.program = policy::parse(source);
        } catch (const Error& e) {
            throw SchemaViolation(io::join_path(p, "source"), std::string("does not parse: ") + e.what());
        }
    }
    if (const auto pr = optional_field(j, "policy_result")) {
        const std::string p = at("policy_result");
        io::require_object(*pr, p);
        policy::PolicyResult res{io::trajectory_from_json(field(*pr, "trajectory", p), io::join_path(p, "trajectory")),
                                 {},
                                 require_count(field(*pr, "steps_used", p), io::join_path(p, "steps_used"))};
        const json& trace = field(*pr, "trace", p);
        if (!trace.is_array()) throw SchemaViolation(io::join_path(p, "trace"), "expected an array");
        for (std::size_t i = 0; i < trace.size(); ++i) {
            const std::string ep = io::index_path(io::join_path(p, "trace"), i);
            io::require_object(trace[i], ep);
            res.trace.push_back({require_count(field(trace[i], "step", ep), io::join_path(ep, "step")),
                                 io::require_string(field(trace[i], "description", ep), io::join_path(ep, "description"))});
        }
        t.policy_result = std::move(res);
    }
    if (const auto c = optional_field(j, "csm_report")) t.csm_report = report_from_json(*c, at("csm_report"));
    if (const auto e = optional_field(j, "error")) {
        const std::string p = at("error");
        io::require_object(*e, p);
        TurnError err;
        err.stage = enum_from(io::require_string(field(*e, "stage", p), io::join_path(p, "stage")),
                              {Stage::Gateway, Stage::Response, Stage::Parse, Stage::Execute, Stage::Csm},
                              io::join_path(p, "stage"));
        err.code = io::require_string(field(*e, "code", p), io::join_path(p, "code"));
        err.message = io::require_string(field(*e, "message", p), io::join_path(p, "message"));
        if (const auto v = optional_field(*e, "line")) err.line = require_int(*v, io::join_path(p, "line"));
        if (const auto v = optional_field(*e, "column")) err.column = require_int(*v, io::join_path(p, "column"));
        if (const auto v = optional_field(*e, "kind")) err.kind = io::require_string(*v, io::join_path(p, "kind"));
        t.error = std::move(err);
    }
    if (const auto x = optional_field(j, "explanation")) t.explanation = io::require_string(*x, at("explanation"));
    return t;
}

Session session_from_json(const json& j, const std::string& path) {
    io::require_object(j, path);
    auto at = [&](const char* key) { return io::join_path(path, key); };
    Session s(io::require_string(field(j, "id", path), at("id")),
              io::trajectory_from_json(field(j, "base_trajectory", path), at("base_trajectory")),
              io::scene_from_json(field(j, "scene", path), at("scene")),
              io::profile_from_json(field(j, "profile", path), at("profile")));
    s.status = enum_from(io::require_string(field(j, "status", path), at("status")), {Status::Active, Status::Closed},
                         at("status"));
    if (const auto c = optional_field(j, "csm")) s.csm = csm::config_from_json(*c, at("csm"));
    if (const auto g = optional_field(j, "include_examples")) {
        s.ground.include_examples = io::require_bool(*g, at("include_examples"));
    }
    const json& turns = field(j, "turns", path);
    if (!turns.is_array()) throw SchemaViolation(at("turns"), "expected an array");
    for (std::size_t i = 0; i < turns.size(); ++i) {
        Turn t = turn_from_json(turns[i], io::index_path(at("turns"), i));
        if (t.index != i) throw SchemaViolation(io::index_path(at("turns"), i), "turn index out of sequence");
        s.turns.push_back(std::move(t));
    }
    return s;
}

Store::Store(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create sessions directory " + dir_.string() + ": " + ec.message());
}

std::filesystem::path Store::path_for(const std::string& id) const {
    const bool safe = !id.empty() && id.size() <= 128 &&
                      std::all_of(id.begin(), id.end(), [](unsigned char c) { return std::isalnum(c) || c == '-' || c == '_'; });
    if (!safe) throw SessionNotFound(id);
    return dir_ / (id + ".json");
}

void Store::save(const Session& s) const { io::write_json_file(path_for(s.id), to_json(s)); }

bool Store::exists(const std::string& id) const {
    try {
        return std::filesystem::is_regular_file(path_for(id));
    } catch (const SessionNotFound&) {
        return false;
    }
}

Session Store::load(const std::string& id) const {
    const auto p = path_for(id);
    if (!std::filesystem::is_regular_file(p)) throw SessionNotFound(id);
    return session_from_json(io::read_json_file(p), "");
}

std::vector<std::string> Store::list() const {
    std::vector<std::string> out;
    for (const auto& e : std::filesystem::directory_iterator(dir_)) {
        if (e.is_regular_file() && e.path().extension() == ".json") out.push_back(e.path().stem().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace ovita::session
