#pragma once

// Prompt grounding, chat-completion transport, and response parsing.
// ground(), explain_prompt() and parse_response() are pure; only backends do I/O.

#include "ovita/core/error.hpp"
#include "ovita/core/model.hpp"
#include "ovita/policy/ast.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace ovita::llm {

class EmptyInstruction : public Error {
public:
    EmptyInstruction() : Error("empty_instruction", "instruction must not be empty") {}
};

class Network : public Error {
public:
    Network(std::string detail, int status)
        : Error("network", detail + (status > 0 ? " (HTTP " + std::to_string(status) + ")" : "")), status_(status) {}
    /// HTTP status of the last attempt, or -1 when no response arrived.
    int status() const noexcept { return status_; }

private:
    int status_;
};

class ReplayMiss : public Error {
public:
    explicit ReplayMiss(std::string hash)
        : Error("replay_miss", "no recorded response for prompt " + hash), hash_(std::move(hash)) {}
    const std::string& hash() const noexcept { return hash_; }

private:
    std::string hash_;
};

class AuthMissing : public Error {
public:
    explicit AuthMissing(std::string env_var)
        : Error("auth_missing", "environment variable " + env_var + " is not set"), env_var_(std::move(env_var)) {}
    const std::string& env_var() const noexcept { return env_var_; }

private:
    std::string env_var_;
};

struct GroundFlags {
    bool include_examples = true;
};

struct PromptParts {
    std::string instruction;
    std::string scene_description;
    std::string object_table;
    std::string trajectory_summary;
    std::string coordinate_system;
    std::string trajectory_rules;
    std::string function_definitions;
    std::string examples;  // empty when excluded
};

struct GroundedPrompt {
    std::string system;
    std::string user;
    PromptParts parts;
};

/// Lowercase hex SHA-256 of system + "\n\n" + user; the replay key.
std::string prompt_hash(const std::string& system, const std::string& user);
std::string prompt_hash(const GroundedPrompt& p);

std::string sha256_hex(const std::string& data);

GroundedPrompt ground(const std::string& instruction, const Scene& scene, const Trajectory& trajectory,
                      GroundFlags flags = {});

/// The code-explanation prompt (methodology, hyperparameters, assumptions).
GroundedPrompt explain_prompt(const policy::PolicyProgram& program, const std::string& plan);

/// Text of an embedded prompt template, e.g. "system.txt"; empty if unknown.
std::string_view template_text(std::string_view name);

struct ModelResponse {
    std::string raw;
    std::string plan;
    std::string code;
    bool parse_ok = false;
};

/// Total: extracts {"plan", "code"} from raw model output, tolerating markdown
/// fences and surrounding prose. parse_ok is false when no such object exists.
ModelResponse parse_response(const std::string& raw);

enum class BackendKind { Http, Replay };

struct BackendConfig {
    BackendKind kind = BackendKind::Replay;
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-4o";
    double temperature = 0.2;
    std::string api_key_env = "OVITA_API_KEY";
    std::chrono::milliseconds timeout{60000};
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{500};
    std::string replay_path;
};

void validate(const BackendConfig& cfg);
std::string to_string(BackendKind k);
BackendKind backend_kind_from_string(const std::string& s);
nlohmann::json to_json(const BackendConfig& cfg);
BackendConfig backend_config_from_json(const nlohmann::json& j, const std::string& path = "");

using EnvLookup = std::function<const char*(const char*)>;

/// Overrides fields of `base` from OVITA_BACKEND, OVITA_REPLAY, OVITA_ENDPOINT,
/// OVITA_MODEL, OVITA_TEMPERATURE and OVITA_API_KEY_ENV when they are set and non-empty.
BackendConfig apply_env(BackendConfig base, const EnvLookup& lookup = [](const char* n) { return std::getenv(n); });

/// Raw chat-completion transport. Implementations must be safe to call concurrently.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string complete_raw(const GroundedPrompt& prompt) = 0;
};

/// Content-addressed transcript: JSON lines of {"prompt_sha256", "response"}.
class ReplayBackend : public Backend {
public:
    explicit ReplayBackend(const std::string& path);
    explicit ReplayBackend(std::map<std::string, std::string> table) : table_(std::move(table)) {}

    std::string complete_raw(const GroundedPrompt& prompt) override;
    std::size_t size() const { return table_.size(); }

private:
    std::map<std::string, std::string> table_;
};

/// OpenAI-style chat completions over HTTP(S) with retry on 429/5xx and transport errors.
class HttpBackend : public Backend {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit HttpBackend(BackendConfig cfg, Sleeper sleep = {});
    std::string complete_raw(const GroundedPrompt& prompt) override;

    /// Attempts made by the last call (1 when the first request succeeded).
    int last_attempts() const;

private:
    BackendConfig cfg_;
    Sleeper sleep_;
    mutable std::mutex mu_;
    int last_attempts_ = 0;
};

std::shared_ptr<Backend> make_backend(const BackendConfig& cfg);

/// Backend wrapper that remembers every exchange so it can be written as a transcript.
class RecordingBackend : public Backend {
public:
    explicit RecordingBackend(std::shared_ptr<Backend> inner) : inner_(std::move(inner)) {}
    std::string complete_raw(const GroundedPrompt& prompt) override;
    void write_transcript(const std::string& path) const;
    std::map<std::string, std::string> entries() const;

private:
    std::shared_ptr<Backend> inner_;
    mutable std::mutex mu_;
    std::map<std::string, std::string> entries_;
};

void write_transcript(const std::string& path, const std::map<std::string, std::string>& entries);
std::map<std::string, std::string> read_transcript(const std::string& path);

ModelResponse complete(const GroundedPrompt& prompt, Backend& backend);
ModelResponse complete(const GroundedPrompt& prompt, const BackendConfig& cfg);

std::string explain(const policy::PolicyProgram& program, const std::string& plan, Backend& backend);
std::string explain(const policy::PolicyProgram& program, const std::string& plan, const BackendConfig& cfg);

}  // namespace ovita::llm
