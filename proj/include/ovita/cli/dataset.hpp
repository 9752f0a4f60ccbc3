#pragma once

// Dataset samples: an initial trajectory, the scene, an instruction and an
// optional robot profile, plus follow-up feedback turns for session runs.

#include "ovita/core/model.hpp"
#include "ovita/llm/gateway.hpp"
#include "ovita/session/session.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ovita::dataset {

struct FollowUp {
    std::string instruction;
    session::Context context = session::Context::Current;
};

struct DatasetSample {
    std::string name;  // file stem; also the session id of a corpus run
    Trajectory trajectory;
    Scene scene;
    std::string instruction;
    std::optional<RobotProfile> profile;
    std::vector<FollowUp> followups;

    RobotProfile effective_profile() const { return profile.value_or(RobotProfile{}); }
};

DatasetSample sample_from_json(const nlohmann::json& j, std::string name, const std::string& path = "");
nlohmann::json to_json(const DatasetSample& s);

/// Strict load; errors carry the field path. Throws IoError, SchemaViolation.
DatasetSample load_sample(const std::filesystem::path& file);

/// `target` itself when it is a file, else every *.json directly inside it, sorted.
std::vector<std::filesystem::path> sample_files(const std::filesystem::path& target);

struct Validation {
    std::filesystem::path file;
    std::optional<std::string> error;  // nullopt when the sample is valid
};

std::vector<Validation> validate_files(const std::vector<std::filesystem::path>& files);

/// Runs the instruction and every follow-up as one session with id = sample name.
session::Session run_sample(const DatasetSample& sample, llm::Backend& backend, const csm::CsmConfig& csm = {},
                            llm::GroundFlags flags = {});

/// Canned responses keyed by the effective instruction the model sees. Used to
/// author replay transcripts offline. Unknown instructions throw ReplayMiss.
class ScriptBackend : public llm::Backend {
public:
    explicit ScriptBackend(std::map<std::string, std::string> responses) : responses_(std::move(responses)) {}
    /// File format: {"<instruction>": {"plan": str, "code": str}, ...}.
    static ScriptBackend from_file(const std::filesystem::path& file);

    std::string complete_raw(const llm::GroundedPrompt& prompt) override;

private:
    std::map<std::string, std::string> responses_;
};

}  // namespace ovita::dataset
