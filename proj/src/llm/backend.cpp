#include "ovita/llm/gateway.hpp"

#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <optional>
#include <regex>
#include <sstream>
#include <thread>

namespace ovita::llm {

std::string to_string(BackendKind k) { return k == BackendKind::Http ? "http" : "replay"; }

BackendKind backend_kind_from_string(const std::string& s) {
    if (s == "http") return BackendKind::Http;
    if (s == "replay") return BackendKind::Replay;
    throw InvalidArgument("backend kind must be \"http\" or \"replay\", got \"" + s + "\"");
}

void validate(const BackendConfig& cfg) {
    if (!(cfg.temperature >= 0.0 && cfg.temperature <= 1.0)) {
        throw SchemaViolation("temperature", "must lie in [0, 1]");
    }
    if (cfg.max_retries < 0) throw SchemaViolation("max_retries", "must be non-negative");
    if (cfg.timeout.count() <= 0) throw SchemaViolation("timeout_ms", "must be positive");
    if (cfg.initial_backoff.count() < 0) throw SchemaViolation("initial_backoff_ms", "must be non-negative");
    if (cfg.kind == BackendKind::Replay && cfg.replay_path.empty()) {
        throw SchemaViolation("replay_path", "required for the replay backend");
    }
    if (cfg.kind == BackendKind::Http && cfg.endpoint.empty()) throw SchemaViolation("endpoint", "required for http");
}

nlohmann::json to_json(const BackendConfig& cfg) {
    return {{"kind", to_string(cfg.kind)},
            {"endpoint", cfg.endpoint},
            {"model", cfg.model},
            {"temperature", cfg.temperature},
            {"api_key_env", cfg.api_key_env},
            {"timeout_ms", cfg.timeout.count()},
            {"max_retries", cfg.max_retries},
            {"initial_backoff_ms", cfg.initial_backoff.count()},
            {"replay_path", cfg.replay_path}};
}

BackendConfig backend_config_from_json(const nlohmann::json& j, const std::string& path) {
    auto at = [&path](const std::string& key) { return path.empty() ? key : path + "." + key; };
    if (!j.is_object()) throw SchemaViolation(path.empty() ? "$" : path, "expected an object");
    BackendConfig c;
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "kind") {
                c.kind = backend_kind_from_string(v.get<std::string>());
            } else if (key == "endpoint") {
                c.endpoint = v.get<std::string>();
            } else if (key == "model") {
                c.model = v.get<std::string>();
            } else if (key == "temperature") {
                c.temperature = v.get<double>();
            } else if (key == "api_key_env") {
                c.api_key_env = v.get<std::string>();
            } else if (key == "timeout_ms") {
                c.timeout = std::chrono::milliseconds(v.get<long long>());
            } else if (key == "max_retries") {
                c.max_retries = v.get<int>();
            } else if (key == "initial_backoff_ms") {
                c.initial_backoff = std::chrono::milliseconds(v.get<long long>());
            } else if (key == "replay_path") {
                c.replay_path = v.get<std::string>();
            } else {
                throw SchemaViolation(at(key), "unknown key");
            }
        } catch (const nlohmann::json::exception&) {
            throw SchemaViolation(at(key), "wrong type");
        } catch (const InvalidArgument& e) {
            throw SchemaViolation(at(key), e.what());
        }
    }
    try {
        validate(c);
    } catch (const SchemaViolation& e) {
        throw SchemaViolation(at(e.path()), e.reason());
    }
    return c;
}

BackendConfig apply_env(BackendConfig base, const EnvLookup& lookup) {
    auto get = [&lookup](const char* name) -> std::optional<std::string> {
        const char* v = lookup(name);
        if (v == nullptr || *v == '\0') return std::nullopt;
        return std::string(v);
    };
    if (auto v = get("OVITA_BACKEND")) base.kind = backend_kind_from_string(*v);
    if (auto v = get("OVITA_REPLAY")) base.replay_path = *v;
    if (auto v = get("OVITA_ENDPOINT")) base.endpoint = *v;
    if (auto v = get("OVITA_MODEL")) base.model = *v;
    if (auto v = get("OVITA_API_KEY_ENV")) base.api_key_env = *v;
    if (auto v = get("OVITA_TEMPERATURE")) {
        std::size_t used = 0;
        double t = -1.0;
        try {
            t = std::stod(*v, &used);
        } catch (const std::exception&) {
        }
        if (used != v->size() || !(t >= 0.0 && t <= 1.0)) {
            throw SchemaViolation("OVITA_TEMPERATURE", "must be a number in [0, 1]");
        }
        base.temperature = t;
    }
    return base;
}

std::map<std::string, std::string> read_transcript(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open replay transcript " + path);
    std::map<std::string, std::string> table;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        const std::string where = path + ":" + std::to_string(lineno);
        if (j.is_discarded() || !j.is_object()) throw SchemaViolation(where, "not a JSON object");
        if (!j.contains("prompt_sha256") || !j["prompt_sha256"].is_string()) {
            throw SchemaViolation(where + ".prompt_sha256", "missing or not a string");
        }
        if (!j.contains("response") || !j["response"].is_string()) {
            throw SchemaViolation(where + ".response", "missing or not a string");
        }
        const std::string hash = j["prompt_sha256"];
        const std::string response = j["response"];
        const auto [it, inserted] = table.emplace(hash, response);
        if (!inserted && it->second != response) {
            throw SchemaViolation(where, "conflicting responses recorded for prompt " + hash);
        }
    }
    return table;
}

void write_transcript(const std::string& path, const std::map<std::string, std::string>& entries) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp);
        for (const auto& [hash, response] : entries) {
            out << nlohmann::json{{"prompt_sha256", hash}, {"response", response}}.dump() << '\n';
        }
        if (!out) throw IoError("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot replace " + path);
}

ReplayBackend::ReplayBackend(const std::string& path) : table_(read_transcript(path)) {}

std::string ReplayBackend::complete_raw(const GroundedPrompt& prompt) {
    const std::string h = prompt_hash(prompt);
    const auto it = table_.find(h);
    if (it == table_.end()) throw ReplayMiss(h);
    return it->second;
}

HttpBackend::HttpBackend(BackendConfig cfg, Sleeper sleep) : cfg_(std::move(cfg)), sleep_(std::move(sleep)) {
    validate(cfg_);
    if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

int HttpBackend::last_attempts() const {
    std::lock_guard<std::mutex> lock(mu_);
    return last_attempts_;
}

std::string HttpBackend::complete_raw(const GroundedPrompt& prompt) {
    const char* key = std::getenv(cfg_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') throw AuthMissing(cfg_.api_key_env);

    static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(cfg_.endpoint, m, url)) throw InvalidArgument("malformed endpoint URL " + cfg_.endpoint);
    const std::string origin = m[1];
    const std::string path = m[2].matched ? std::string(m[2]) : "/";

    const nlohmann::json body = {{"model", cfg_.model},
                                 {"temperature", cfg_.temperature},
                                 {"messages", nlohmann::json::array({{{"role", "system"}, {"content", prompt.system}},
                                                                     {{"role", "user"}, {"content", prompt.user}}})}};
    const std::string payload = body.dump();

    httplib::Client client(origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    const httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};

    std::string last_error;
    int last_status = -1;
    int attempts = 0;
    auto backoff = cfg_.initial_backoff;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0) {
            sleep_(backoff);
            backoff *= 2;
        }
        ++attempts;
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = "request failed: " + httplib::to_string(res.error());
            last_status = -1;
            continue;
        }
        last_status = res->status;
        if (res->status == 429 || res->status >= 500) {
            last_error = "server asked to retry";
            continue;
        }
        {
            std::lock_guard<std::mutex> lock(mu_);
            last_attempts_ = attempts;
        }
        if (res->status != 200) throw Network("chat completion rejected", res->status);
        const auto j = nlohmann::json::parse(res->body, nullptr, false);
        if (j.is_discarded()) throw Network("response body is not JSON", res->status);
        try {
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw Network("response lacks choices[0].message.content", res->status);
        }
    }
    {
        std::lock_guard<std::mutex> lock(mu_);
        last_attempts_ = attempts;
    }
    throw Network(last_error + " after " + std::to_string(attempts) + " attempts", last_status);
}

std::shared_ptr<Backend> make_backend(const BackendConfig& cfg) {
    validate(cfg);
    if (cfg.kind == BackendKind::Replay) return std::make_shared<ReplayBackend>(cfg.replay_path);
    return std::make_shared<HttpBackend>(cfg);
}

std::string RecordingBackend::complete_raw(const GroundedPrompt& prompt) {
    std::string r = inner_->complete_raw(prompt);
    std::lock_guard<std::mutex> lock(mu_);
    entries_[prompt_hash(prompt)] = r;
    return r;
}

std::map<std::string, std::string> RecordingBackend::entries() const {
    std::lock_guard<std::mutex> lock(mu_);
    return entries_;
}

void RecordingBackend::write_transcript(const std::string& path) const { llm::write_transcript(path, entries()); }

ModelResponse complete(const GroundedPrompt& prompt, Backend& backend) {
    return parse_response(backend.complete_raw(prompt));
}

ModelResponse complete(const GroundedPrompt& prompt, const BackendConfig& cfg) {
    auto backend = make_backend(cfg);
    return complete(prompt, *backend);
}

std::string explain(const policy::PolicyProgram& program, const std::string& plan, Backend& backend) {
    return backend.complete_raw(explain_prompt(program, plan));
}

std::string explain(const policy::PolicyProgram& program, const std::string& plan, const BackendConfig& cfg) {
    auto backend = make_backend(cfg);
    return explain(program, plan, *backend);
}

}  // namespace ovita::llm
