#pragma once

// HTTP API over the session store. Every handler loads the session from disk,
// so a restart loses nothing that was acknowledged.

#include "ovita/core/error.hpp"
#include "ovita/llm/gateway.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace ovita::service {

class BindFailure : public Error {
public:
    BindFailure(const std::string& host, int port)
        : Error("bind_failure", "cannot bind " + host + ":" + std::to_string(port)) {}
};

/// Closed set of machine codes carried by error bodies {"error": {"code", "message"}}.
inline constexpr const char* kErrorCodes[] = {
    "bad_request",        // body is not JSON or misses required fields
    "schema_violation",   // a domain object failed validation (also carries "path")
    "invalid_argument",
    "empty_instruction",
    "first_turn_must_be_original",
    "session_not_found",
    "turn_not_found",
    "session_closed",
    "nothing_to_explain",  // the turn has no parsed program
    "not_found",           // unknown route
    "model_unavailable",   // backend failure while explaining
    "io_error",
    "internal_error",
};

struct ServerConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::filesystem::path sessions_dir = "sessions";
    std::string cors_origin = "*";
    std::optional<std::filesystem::path> ui_dir;  // static files served at /
    std::chrono::seconds turn_timeout{120};
};

/// "host:port" -> (host, port).
std::pair<std::string, int> parse_bind(const std::string& bind);

class Server {
public:
    Server(ServerConfig cfg, std::shared_ptr<llm::Backend> backend);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds the socket; returns the bound port. Throws BindFailure.
    int bind();
    /// Serves until stop(); bind() first.
    void run();
    void stop();
    bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace ovita::service
