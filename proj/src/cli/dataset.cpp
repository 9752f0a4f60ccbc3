#include "ovita/cli/dataset.hpp"

#include "ovita/core/json_io.hpp"

#include <algorithm>

namespace ovita::dataset {

using nlohmann::json;

DatasetSample sample_from_json(const json& j, std::string name, const std::string& path) {
    io::require_object(j, path);
    io::reject_unknown_keys(j, {"instruction", "trajectory", "scene", "profile", "followups"}, path);
    const std::string instruction =
        io::require_string(io::require(j, "instruction", path), io::join_path(path, "instruction"));
    if (instruction.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw SchemaViolation(io::join_path(path, "instruction"), "must not be empty");
    }
    DatasetSample s{std::move(name),
                    io::trajectory_from_json(io::require(j, "trajectory", path), io::join_path(path, "trajectory")),
                    io::scene_from_json(io::require(j, "scene", path), io::join_path(path, "scene")),
                    instruction,
                    std::nullopt,
                    {}};
    if (const auto it = j.find("profile"); it != j.end()) {
        s.profile = io::profile_from_json(*it, io::join_path(path, "profile"));
    }
    if (const auto it = j.find("followups"); it != j.end()) {
        const std::string fp = io::join_path(path, "followups");
        if (!it->is_array()) throw SchemaViolation(fp, "expected an array");
        for (std::size_t k = 0; k < it->size(); ++k) {
            const std::string p = io::index_path(fp, k);
            const json& f = (*it)[k];
            io::require_object(f, p);
            io::reject_unknown_keys(f, {"instruction", "context"}, p);
            FollowUp fu;
            fu.instruction = io::require_string(io::require(f, "instruction", p), io::join_path(p, "instruction"));
            const std::string ctx = io::require_string(io::require(f, "context", p), io::join_path(p, "context"));
            try {
                fu.context = session::context_from_string(ctx);
            } catch (const InvalidArgument&) {
                throw SchemaViolation(io::join_path(p, "context"), "expected \"original\" or \"current\"");
            }
            s.followups.push_back(std::move(fu));
        }
    }
    return s;
}

json to_json(const DatasetSample& s) {
    json j = {{"instruction", s.instruction}, {"trajectory", io::to_json(s.trajectory)}, {"scene", io::to_json(s.scene)}};
    if (s.profile) j["profile"] = io::to_json(*s.profile);
    if (!s.followups.empty()) {
        json f = json::array();
        for (const auto& fu : s.followups) {
            f.push_back({{"instruction", fu.instruction}, {"context", session::to_string(fu.context)}});
        }
        j["followups"] = std::move(f);
    }
    return j;
}

DatasetSample load_sample(const std::filesystem::path& file) {
    return sample_from_json(io::read_json_file(file), file.stem().string());
}

std::vector<std::filesystem::path> sample_files(const std::filesystem::path& target) {
    std::error_code ec;
    if (std::filesystem::is_regular_file(target, ec)) return {target};
    if (!std::filesystem::is_directory(target, ec)) throw IoError("no such file or directory: " + target.string());
    std::vector<std::filesystem::path> out;
    for (const auto& e : std::filesystem::directory_iterator(target)) {
        if (e.is_regular_file() && e.path().extension() == ".json") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Validation> validate_files(const std::vector<std::filesystem::path>& files) {
    std::vector<Validation> out;
    for (const auto& f : files) {
        Validation v{f, std::nullopt};
        try {
            load_sample(f);
        } catch (const Error& e) {
            v.error = e.what();
        }
        out.push_back(std::move(v));
    }
    return out;
}

session::Session run_sample(const DatasetSample& sample, llm::Backend& backend, const csm::CsmConfig& csm,
                            llm::GroundFlags flags) {
    session::Session s =
        session::start(sample.trajectory, sample.scene, sample.effective_profile(), csm, flags, sample.name);
    session::adapt(s, sample.instruction, session::Context::Original, backend);
    for (const auto& fu : sample.followups) session::adapt(s, fu.instruction, fu.context, backend);
    return s;
}

ScriptBackend ScriptBackend::from_file(const std::filesystem::path& file) {
    const json j = io::read_json_file(file);
    io::require_object(j, "");
    std::map<std::string, std::string> responses;
    for (const auto& [instruction, r] : j.items()) {
        const std::string p = io::join_path("", instruction);
        io::require_object(r, p);
        io::reject_unknown_keys(r, {"plan", "code"}, p);
        responses[instruction] = json{{"plan", io::require_string(io::require(r, "plan", p), io::join_path(p, "plan"))},
                                      {"code", io::require_string(io::require(r, "code", p), io::join_path(p, "code"))}}
                                     .dump();
    }
    return ScriptBackend(std::move(responses));
}

std::string ScriptBackend::complete_raw(const llm::GroundedPrompt& prompt) {
    const auto it = responses_.find(prompt.parts.instruction);
    if (it == responses_.end()) throw llm::ReplayMiss(llm::prompt_hash(prompt));
    return it->second;
}

}  // namespace ovita::dataset
