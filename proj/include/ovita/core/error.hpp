#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace ovita {

/// Base of every exception thrown by the library. `code()` is a stable
/// machine-readable identifier (used by the CLI exit codes and the HTTP API).
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& message) : Error("invalid_argument", message) {}
};

/// A document did not match the expected schema. `path()` is a JSON-pointer-ish
/// field path such as `waypoints[3]`.
class SchemaViolation : public Error {
public:
    SchemaViolation(std::string path, std::string reason)
        : Error("schema_violation", path + ": " + reason),
          path_(std::move(path)),
          reason_(std::move(reason)) {}

    const std::string& path() const noexcept { return path_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::string path_;
    std::string reason_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("io_error", message) {}
};

}  // namespace ovita
