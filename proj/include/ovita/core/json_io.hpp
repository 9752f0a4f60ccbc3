#pragma once

// JSON encodings of the core types. Decoders validate strictly and report
// failures as SchemaViolation carrying the offending field path.

#include "ovita/core/model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace ovita::io {

using nlohmann::json;

json to_json(const Trajectory& t);
json to_json(const Scene& s);
json to_json(const SceneObject& o);
json to_json(const RobotProfile& p);
json to_json(const WorkspaceSpec& w);
json to_json(const Vec3& v);

/// `path` prefixes every reported field path (empty for a document root).
Trajectory trajectory_from_json(const json& j, const std::string& path = "");
Scene scene_from_json(const json& j, const std::string& path = "");
RobotProfile profile_from_json(const json& j, const std::string& path = "");
WorkspaceSpec workspace_from_json(const json& j, const std::string& path = "");

/// Reads and parses a JSON file; IoError when unreadable, SchemaViolation on bad syntax.
json read_json_file(const std::filesystem::path& file);
void write_json_file(const std::filesystem::path& file, const json& j);

// Field helpers shared by the domain decoders in other modules.
std::string join_path(const std::string& base, const std::string& key);
std::string index_path(const std::string& base, std::size_t i);
const json& require(const json& obj, const std::string& key, const std::string& path);
double require_number(const json& j, const std::string& path);
bool require_bool(const json& j, const std::string& path);
std::string require_string(const json& j, const std::string& path);
Vec3 require_vec3(const json& j, const std::string& path);
void require_object(const json& j, const std::string& path);
/// Rejects keys outside `allowed` so typos surface instead of being ignored.
void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& path);

}  // namespace ovita::io
