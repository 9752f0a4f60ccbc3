#pragma once

// Adaptation sessions: the ground -> complete -> parse -> execute -> enforce
// pipeline, the original/current feedback selector, and JSON persistence.
//
// A session is not thread-safe; callers serialize turns per session.

#include "ovita/core/error.hpp"
#include "ovita/core/model.hpp"
#include "ovita/csm/csm.hpp"
#include "ovita/llm/gateway.hpp"
#include "ovita/policy/interpreter.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ovita::session {

class SessionClosed : public Error {
public:
    explicit SessionClosed(const std::string& id) : Error("session_closed", "session " + id + " is closed") {}
};

class FirstTurnMustBeOriginal : public Error {
public:
    FirstTurnMustBeOriginal()
        : Error("first_turn_must_be_original", "the first turn of a session must use the original context") {}
};

class SessionNotFound : public Error {
public:
    explicit SessionNotFound(const std::string& id) : Error("session_not_found", "no session " + id) {}
};

class TurnNotFound : public Error {
public:
    TurnNotFound(std::size_t index, std::size_t count)
        : Error("turn_not_found",
                "turn " + std::to_string(index) + " does not exist (session has " + std::to_string(count) + ")") {}
};

enum class Context { Original, Current };
std::string to_string(Context c);
Context context_from_string(const std::string& s);  // "original" | "current"

enum class Status { Active, Closed };
std::string to_string(Status s);

/// Pipeline stage at which a turn failed.
enum class Stage { Gateway, Response, Parse, Execute, Csm };
std::string to_string(Stage s);

struct TurnError {
    Stage stage;
    std::string code;  // machine code of the underlying error
    std::string message;
    std::optional<int> line;  // source position for parse/execute failures
    std::optional<int> column;
    std::optional<std::string> kind;  // RuntimeErrorKind for execute failures
};

struct Turn {
    explicit Turn(Trajectory in) : input(in), output(std::move(in)) {}

    std::size_t index = 0;
    std::string instruction;
    Context context = Context::Original;
    std::string effective_instruction;
    std::string prompt_sha256;
    Trajectory input;
    std::optional<llm::ModelResponse> response;
    std::optional<policy::PolicyProgram> program;
    std::optional<policy::PolicyResult> policy_result;
    std::optional<csm::CsmReport> csm_report;
    Trajectory output;  // equals `input` when the turn failed
    std::optional<TurnError> error;
    std::optional<std::string> explanation;  // write-once annotation

    bool ok() const { return !error.has_value(); }
};

struct Session {
    Session(std::string id_, Trajectory base_, Scene scene_, RobotProfile profile_)
        : id(std::move(id_)), base(std::move(base_)), scene(std::move(scene_)), profile(profile_) {}

    std::string id;
    Trajectory base;  // tau_0
    Scene scene;
    RobotProfile profile;
    csm::CsmConfig csm;
    llm::GroundFlags ground;
    Status status = Status::Active;
    std::vector<Turn> turns;

    /// Output of the latest turn, or the base trajectory before any turn.
    const Trajectory& current() const { return turns.empty() ? base : turns.back().output; }
};

/// Random RFC 4122 version-4 UUID.
std::string new_uuid();

Session start(Trajectory base, Scene scene, RobotProfile profile, csm::CsmConfig csm = {},
              llm::GroundFlags ground = {}, std::string id = new_uuid());

/// Instruction the model sees for a turn with this context appended to `s`.
/// Original: every earlier original-context instruction followed by `instruction`,
/// joined with " Additionally: ". Current: `instruction` alone.
std::string effective_instruction(const Session& s, const std::string& instruction, Context context);

/// Runs one turn and appends it. Model, parse, execution and constraint failures
/// are recorded in the turn; the session is left consistent either way.
/// Throws SessionClosed, FirstTurnMustBeOriginal, and llm::EmptyInstruction.
const Turn& adapt(Session& s, const std::string& instruction, Context context, llm::Backend& backend);

void close(Session& s);

/// Explanation of turn k's program, generated once and stored on the turn.
const std::string& explain(Session& s, std::size_t k, llm::Backend& backend);

/// Everything a viewer needs for turn k: initial (tau_0), input and adapted
/// trajectories, plan, code, parameters, trace, explanation, CSM summary, error.
nlohmann::json visualize_payload(const Session& s, std::size_t k);

/// Plot arrays for a view bundle: {initial, adapted, speeds_initial, speeds_adapted, objects}.
nlohmann::json emit_plot_data(const nlohmann::json& bundle);

/// Re-runs every recorded instruction with its context on a fresh session over
/// the same inputs.
Session replay(const Session& recorded, llm::Backend& backend);

struct Mismatch {
    std::size_t turn;
    std::string field;
    std::string detail;
};

/// Bit-level comparison of the recomputable parts of two transcripts.
std::vector<Mismatch> diff(const Session& expected, const Session& actual);

struct ExecStats {
    std::size_t turns = 0;
    std::size_t gateway_failures = 0;
    std::size_t response_failures = 0;
    std::size_t parse_failures = 0;
    std::size_t execute_failures = 0;
    std::size_t csm_failures = 0;
    std::size_t succeeded = 0;

    /// Share of turns whose model output parsed and executed.
    double executable_rate() const;
    ExecStats& operator+=(const ExecStats& o);
};

ExecStats executability(const Session& s);
ExecStats executability(const std::vector<Turn>& turns);

nlohmann::json to_json(const ExecStats& s);
nlohmann::json to_json(const Turn& t);
nlohmann::json to_json(const Session& s);
Turn turn_from_json(const nlohmann::json& j, const std::string& path = "");
Session session_from_json(const nlohmann::json& j, const std::string& path = "");

/// One JSON file per session, <dir>/<id>.json, written atomically.
class Store {
public:
    explicit Store(std::filesystem::path dir);

    void save(const Session& s) const;
    Session load(const std::string& id) const;
    bool exists(const std::string& id) const;
    std::vector<std::string> list() const;
    std::filesystem::path path_for(const std::string& id) const;

private:
    std::filesystem::path dir_;
};

}  // namespace ovita::session
