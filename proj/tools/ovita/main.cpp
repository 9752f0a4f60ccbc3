// ovita command-line front end.
//
// Exit codes: 0 success, 1 domain error (including failed checks), 2 usage error.

#include "ovita/cli/dataset.hpp"
#include "ovita/core/json_io.hpp"
#include "ovita/csm/csm.hpp"
#include "ovita/llm/gateway.hpp"
#include "ovita/policy/catalog.hpp"
#include "ovita/policy/interpreter.hpp"
#include "ovita/policy/parser.hpp"
#include "ovita/service/server.hpp"
#include "ovita/session/session.hpp"
#include "ovita/tuner/tuner.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <pthread.h>
#include <unistd.h>

using namespace ovita;
using nlohmann::json;

namespace {

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Trajectory load_trajectory(const std::string& path) { return io::trajectory_from_json(io::read_json_file(path)); }
Scene load_scene(const std::string& path) { return io::scene_from_json(io::read_json_file(path)); }
RobotProfile load_profile(const std::string& path) { return io::profile_from_json(io::read_json_file(path)); }

void emit(const json& j) { std::cout << j.dump(2) << "\n"; }

std::string fmt(double v, int precision = 6) {
    std::ostringstream ss;
    ss << std::setprecision(precision) << v;
    return ss.str();
}

// Backend flags shared by every command that talks to a model.
struct BackendFlags {
    std::string kind;
    std::string replay;
    std::string model;
    std::string endpoint;
    std::optional<double> temperature;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--backend", kind, "Model backend (http or replay); default $OVITA_BACKEND or replay")
            ->check(CLI::IsMember({"http", "replay"}));
        cmd->add_option("--replay", replay, "Replay transcript (JSON lines); default $OVITA_REPLAY");
        cmd->add_option("--model", model, "Model name for the http backend; default $OVITA_MODEL");
        cmd->add_option("--endpoint", endpoint, "Chat-completions URL; default $OVITA_ENDPOINT");
        cmd->add_option("--temperature", temperature, "Sampling temperature in [0, 1]")->check(CLI::Range(0.0, 1.0));
    }

    llm::BackendConfig config() const {
        llm::BackendConfig c = llm::apply_env({});
        if (!kind.empty()) c.kind = llm::backend_kind_from_string(kind);
        if (!replay.empty()) c.replay_path = replay;
        if (!model.empty()) c.model = model;
        if (!endpoint.empty()) c.endpoint = endpoint;
        if (temperature) c.temperature = *temperature;
        llm::validate(c);
        return c;
    }

    std::shared_ptr<llm::Backend> make() const { return llm::make_backend(config()); }
};

struct CsmFlags {
    std::optional<double> lambda_dev;
    std::optional<double> lambda_smooth;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--lambda-dev", lambda_dev, "Deviation weight (default 1)");
        cmd->add_option("--lambda-smooth", lambda_smooth, "Smoothness weight (default 0.1)");
    }

    csm::CsmConfig config() const {
        csm::CsmConfig c;
        if (lambda_dev) c.lambda_dev = *lambda_dev;
        if (lambda_smooth) c.lambda_smooth = *lambda_smooth;
        csm::validate(c);
        return c;
    }
};

void print_turns(const session::Session& s) {
    for (const auto& t : s.turns) {
        std::cout << "turn " << t.index << " [" << session::to_string(t.context) << "] ";
        if (t.ok()) {
            std::cout << "ok";
        } else {
            std::cout << "FAILED at " << session::to_string(t.error->stage) << ": " << t.error->message;
        }
        std::cout << "\n  instruction: " << t.instruction << "\n";
        if (t.response && !t.response->plan.empty()) std::cout << "  plan: " << t.response->plan << "\n";
        if (t.program && !t.program->params.empty()) {
            std::cout << "  params:";
            for (const auto& [k, v] : t.program->params) std::cout << " " << k << "=" << policy::to_string(v);
            std::cout << "\n";
        }
        if (t.csm_report) {
            std::cout << "  csm: " << qp::to_string(t.csm_report->status)
                      << "  deviation=" << fmt(t.csm_report->deviation_cost)
                      << "  true_violation=" << fmt(t.csm_report->true_violation_max) << "\n";
        }
        std::cout << "  waypoints: " << t.input.size() << " -> " << t.output.size() << "\n";
    }
}

void print_stats(const session::ExecStats& st) {
    std::cout << "turns " << st.turns << "  succeeded " << st.succeeded << "  gateway " << st.gateway_failures
              << "  response " << st.response_failures << "  parse " << st.parse_failures << "  execute "
              << st.execute_failures << "  csm " << st.csm_failures << "  executable "
              << fmt(100.0 * st.executable_rate(), 4) << "%\n";
}

json param_json(const policy::ParamValue& v) {
    return std::visit([](const auto& x) { return json(x); }, v);
}

// ---- commands ---------------------------------------------------------------

struct AdaptCmd {
    std::string sample, trajectory, scene, profile, instruction, record, session_out;
    bool no_examples = false;
    BackendFlags backend;
    CsmFlags csm;

    int run(bool as_json) const {
        std::optional<dataset::DatasetSample> smp;
        if (!sample.empty()) {
            smp = dataset::load_sample(sample);
            if (!instruction.empty()) {
                smp->instruction = instruction;
                smp->followups.clear();
            }
        } else {
            if (trajectory.empty() || scene.empty() || instruction.empty()) {
                throw CLI::ValidationError("adapt", "give --sample, or all of --trajectory, --scene and --instruction");
            }
            smp = dataset::DatasetSample{"adapt", load_trajectory(trajectory), load_scene(scene), instruction,
                                         std::nullopt, {}};
        }
        if (!profile.empty()) smp->profile = load_profile(profile);

        auto inner = backend.make();
        auto recorder = std::make_shared<llm::RecordingBackend>(inner);
        llm::GroundFlags flags;
        flags.include_examples = !no_examples;
        session::Session s = dataset::run_sample(*smp, *recorder, csm.config(), flags);
        if (!record.empty()) recorder->write_transcript(record);
        if (!session_out.empty()) io::write_json_file(session_out, session::to_json(s));

        if (as_json) {
            json turns = json::array();
            for (std::size_t k = 0; k < s.turns.size(); ++k) turns.push_back(session::visualize_payload(s, k));
            emit({{"turns", turns}, {"executability", session::to_json(session::executability(s))}});
        } else {
            print_turns(s);
        }
        return s.turns.back().ok() ? 0 : 1;
    }
};

struct EnforceCmd {
    std::string trajectory, scene, profile, out;
    CsmFlags csm;

    int run(bool as_json) const {
        const auto report = csm::enforce(load_trajectory(trajectory), load_scene(scene), load_profile(profile),
                                         csm.config());
        if (!out.empty()) io::write_json_file(out, io::to_json(report.solution));
        if (as_json) {
            emit(csm::to_json(report));
        } else {
            std::cout << "status            " << qp::to_string(report.status) << "\n"
                      << "iterations        " << report.iterations << "\n"
                      << "deviation cost    " << fmt(report.deviation_cost) << "\n"
                      << "smoothness cost   " << fmt(report.smoothness_cost) << "\n"
                      << "linear violation  " << fmt(report.linear_violation_max) << "\n"
                      << "true violation    " << fmt(report.true_violation_max) << "\n"
                      << "speeds snapped    " << report.speeds_snapped << "\n";
        }
        return report.status == qp::Status::Optimal ? 0 : 1;
    }
};

struct TuneCmd {
    std::string trajectory, scene, profile;
    int trials = 50;
    std::uint64_t seed = 0;
    std::string sampler = "tpe";

    int run(bool as_json) const {
        tuner::SearchConfig cfg;
        cfg.trials = trials;
        cfg.seed = seed;
        cfg.sampler = sampler == "random" ? tuner::Sampler::Random : tuner::Sampler::Tpe;
        const auto r = tuner::tune(load_trajectory(trajectory), load_scene(scene), load_profile(profile), cfg);
        if (as_json) {
            emit(tuner::to_json(r));
        } else {
            std::cout << "trial  lambda_dev    lambda_smooth  cost          status\n";
            for (std::size_t i = 0; i < r.search.history.size(); ++i) {
                const auto& t = r.search.history[i];
                std::cout << std::left << std::setw(7) << i << std::setw(14) << fmt(t.params.at("lambda_dev"))
                          << std::setw(15) << fmt(t.params.at("lambda_smooth")) << std::setw(14) << fmt(t.cost)
                          << (t.status == tuner::TrialStatus::Optimal ? "optimal" : "infeasible") << "\n";
            }
            std::cout << "best: trial " << r.search.best_index << "  lambda_dev=" << fmt(r.best.lambda_dev)
                      << "  lambda_smooth=" << fmt(r.best.lambda_smooth) << "\n";
        }
        return 0;
    }
};

sigset_t shutdown_signals() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    return set;
}

struct ServeCmd {
    std::string bind = "127.0.0.1:8080";
    std::string sessions = "sessions";
    std::string ui;
    std::string cors = "*";
    int timeout_s = 120;
    BackendFlags backend;

    int run(bool as_json) const {
        service::ServerConfig cfg;
        std::tie(cfg.host, cfg.port) = service::parse_bind(bind);
        cfg.sessions_dir = sessions;
        cfg.cors_origin = cors;
        cfg.turn_timeout = std::chrono::seconds(timeout_s);
        if (!ui.empty()) cfg.ui_dir = ui;
        service::Server server(cfg, backend.make());
        const int port = server.bind();
        if (as_json) {
            std::cout << json{{"host", cfg.host}, {"port", port}}.dump() << std::endl;
        } else {
            std::cout << "listening on http://" << cfg.host << ":" << port << std::endl;
        }
        // Signals were blocked in main before any thread started; wait for one here.
        std::thread waiter([&server] {
            const sigset_t set = shutdown_signals();
            int sig = 0;
            sigwait(&set, &sig);
            server.stop();
        });
        server.run();
        // run() returns on its own only if the listener failed; wake the waiter either way.
        kill(getpid(), SIGTERM);
        waiter.join();
        return 0;
    }
};

struct SessionReplayCmd {
    std::string file;
    BackendFlags backend;

    int run(bool as_json) const {
        const session::Session recorded = session::session_from_json(io::read_json_file(file));
        auto b = backend.make();
        const session::Session again = session::replay(recorded, *b);
        const auto mismatches = session::diff(recorded, again);
        if (as_json) {
            json m = json::array();
            for (const auto& x : mismatches) m.push_back({{"turn", x.turn}, {"field", x.field}, {"detail", x.detail}});
            emit({{"session_id", recorded.id}, {"turns", recorded.turns.size()}, {"identical", mismatches.empty()},
                  {"mismatches", m}});
        } else {
            for (const auto& x : mismatches) std::cout << "turn " << x.turn << " " << x.field << ": " << x.detail << "\n";
            std::cout << recorded.id << ": " << recorded.turns.size() << " turns, "
                      << (mismatches.empty() ? "identical" : std::to_string(mismatches.size()) + " mismatches") << "\n";
        }
        return mismatches.empty() ? 0 : 1;
    }
};

struct PlotCmd {
    std::string file, out;
    std::size_t turn = 0;

    int run(bool) const {
        const session::Session s = session::session_from_json(io::read_json_file(file));
        const json plot = session::emit_plot_data(session::visualize_payload(s, turn));
        if (out.empty()) {
            emit(plot);
        } else {
            io::write_json_file(out, plot);
        }
        return 0;
    }
};

struct PolicyRunCmd {
    std::string program, trajectory, scene;
    std::size_t budget = policy::kDefaultStepBudget;

    int run(bool as_json) const {
        const auto prog = policy::parse(read_text(program));
        const Scene sc = scene.empty() ? Scene{} : load_scene(scene);
        const auto r = policy::execute(prog, load_trajectory(trajectory), sc, budget);
        if (as_json) {
            json params = json::object();
            for (const auto& [k, v] : prog.params) params[k] = param_json(v);
            json trace = json::array();
            for (const auto& e : r.trace) trace.push_back({{"step", e.step}, {"description", e.description}});
            emit({{"trajectory", io::to_json(r.trajectory)},
                  {"params", params},
                  {"trace", trace},
                  {"steps_used", r.steps_used}});
        } else {
            for (const auto& e : r.trace) std::cout << "[" << e.step << "] " << e.description << "\n";
            std::cout << "x y z v\n";
            for (const auto& w : r.trajectory) {
                std::cout << fmt(w.x) << " " << fmt(w.y) << " " << fmt(w.z) << " " << fmt(w.v) << "\n";
            }
        }
        return 0;
    }
};

struct PolicyFmtCmd {
    std::string file;
    bool check = false;

    int run(bool as_json) const {
        const std::string src = read_text(file);
        const std::string canonical = policy::print(policy::parse(src).ast);
        if (check) {
            const bool same = canonical == src;
            if (as_json) {
                emit({{"file", file}, {"canonical", same}});
            } else if (!same) {
                std::cout << file << " is not canonical\n";
            }
            return same ? 0 : 1;
        }
        if (as_json) {
            emit({{"source", canonical}});
        } else {
            std::cout << canonical;
        }
        return 0;
    }
};

int policy_catalog(bool as_json) {
    if (as_json) {
        json all = json::array();
        for (const auto& b : policy::builtin_transforms()) {
            json params = json::array();
            for (const auto& p : b.params) {
                json pj = {{"name", p.name}, {"required", p.required}};
                if (!p.required) pj["default"] = p.default_value;
                params.push_back(pj);
            }
            all.push_back({{"name", b.name}, {"kind", policy::to_string(b.kind)}, {"params", params}, {"math", b.math}});
        }
        emit(all);
        return 0;
    }
    for (const auto& b : policy::builtin_transforms()) {
        std::cout << b.name << "(";
        for (std::size_t i = 0; i < b.params.size(); ++i) {
            const auto& p = b.params[i];
            std::cout << (i ? ", " : "") << p.name << (p.required ? "" : "=" + p.default_value);
        }
        std::cout << ")  [" << policy::to_string(b.kind) << "]\n    " << b.math << "\n";
    }
    return 0;
}

struct DatasetValidateCmd {
    std::vector<std::string> targets;

    int run(bool as_json) const {
        std::vector<std::filesystem::path> files;
        for (const auto& t : targets) {
            for (auto& f : dataset::sample_files(t)) files.push_back(std::move(f));
        }
        const auto results = dataset::validate_files(files);
        std::size_t bad = 0;
        json out = json::array();
        for (const auto& r : results) {
            bad += r.error ? 1 : 0;
            if (as_json) {
                out.push_back({{"file", r.file.string()}, {"ok", !r.error}, {"error", r.error ? json(*r.error) : json()}});
            } else {
                std::cout << (r.error ? "INVALID " : "ok      ") << r.file.string() << (r.error ? "  " + *r.error : "")
                          << "\n";
            }
        }
        if (as_json) {
            emit({{"samples", out}, {"valid", results.size() - bad}, {"invalid", bad}});
        } else {
            std::cout << results.size() - bad << "/" << results.size() << " samples valid\n";
        }
        return bad == 0 && !results.empty() ? 0 : 1;
    }
};

// Runs every sample through a backend; optionally checks or rewrites golden sessions.
struct DatasetRunCmd {
    std::string target, golden, record, script;
    bool update = false;
    BackendFlags backend;

    int run(bool as_json) const {
        std::shared_ptr<llm::Backend> inner;
        if (!script.empty()) {
            inner = std::make_shared<dataset::ScriptBackend>(dataset::ScriptBackend::from_file(script));
        } else {
            inner = backend.make();
        }
        auto recorder = std::make_shared<llm::RecordingBackend>(inner);
        session::ExecStats total;
        std::size_t mismatched = 0;
        json per = json::array();
        for (const auto& f : dataset::sample_files(target)) {
            const auto smp = dataset::load_sample(f);
            const session::Session s = dataset::run_sample(smp, *recorder);
            const auto st = session::executability(s);
            total += st;
            json entry = {{"sample", smp.name}, {"executability", session::to_json(st)}};
            if (!golden.empty()) {
                const auto gpath = std::filesystem::path(golden) / (smp.name + ".json");
                if (update) {
                    std::filesystem::create_directories(golden);
                    io::write_json_file(gpath, session::to_json(s));
                } else {
                    const auto mism = session::diff(session::session_from_json(io::read_json_file(gpath)), s);
                    mismatched += mism.empty() ? 0 : 1;
                    entry["golden_identical"] = mism.empty();
                    if (!as_json) {
                        for (const auto& m : mism) {
                            std::cout << smp.name << " turn " << m.turn << " " << m.field << ": " << m.detail << "\n";
                        }
                    }
                }
            }
            if (!as_json) {
                std::cout << std::left << std::setw(36) << smp.name;
                print_stats(st);
            }
            per.push_back(std::move(entry));
        }
        if (!record.empty()) recorder->write_transcript(record);
        if (as_json) {
            emit({{"samples", per}, {"executability", session::to_json(total)}, {"golden_mismatches", mismatched}});
        } else {
            std::cout << std::left << std::setw(36) << "total";
            print_stats(total);
        }
        return mismatched == 0 ? 0 : 1;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ovita: language-driven trajectory adaptation with constraint enforcement"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("ovita 0.1.0"));
    bool as_json = false;
    app.fallthrough();
    app.add_flag("--json", as_json, "Machine-readable JSON on stdout");

    int rc = 0;
    auto guarded = [&rc, &as_json](auto fn) {
        return [&rc, &as_json, fn]() { rc = fn(as_json); };
    };

    AdaptCmd adapt;
    auto* c_adapt = app.add_subcommand("adapt", "Adapt a trajectory to an instruction (single shot or sample run)");
    c_adapt->add_option("--sample", adapt.sample, "Dataset sample JSON")->check(CLI::ExistingFile);
    c_adapt->add_option("--trajectory", adapt.trajectory, "Trajectory JSON")->check(CLI::ExistingFile);
    c_adapt->add_option("--scene", adapt.scene, "Scene JSON")->check(CLI::ExistingFile);
    c_adapt->add_option("--profile", adapt.profile, "Robot profile JSON")->check(CLI::ExistingFile);
    c_adapt->add_option("-i,--instruction", adapt.instruction, "Instruction text");
    c_adapt->add_option("--record", adapt.record, "Write the exchanged prompts as a replay transcript");
    c_adapt->add_option("--session-out", adapt.session_out, "Write the session transcript JSON");
    c_adapt->add_flag("--no-examples", adapt.no_examples, "Leave worked examples out of the prompt");
    adapt.backend.add_to(c_adapt);
    adapt.csm.add_to(c_adapt);
    c_adapt->callback(guarded([&adapt](bool j) { return adapt.run(j); }));

    EnforceCmd enforce;
    auto* c_enf = app.add_subcommand("enforce", "Project a trajectory onto the robot and scene constraints");
    c_enf->add_option("--trajectory", enforce.trajectory)->required()->check(CLI::ExistingFile);
    c_enf->add_option("--scene", enforce.scene)->required()->check(CLI::ExistingFile);
    c_enf->add_option("--profile", enforce.profile)->required()->check(CLI::ExistingFile);
    c_enf->add_option("--out", enforce.out, "Write the constrained trajectory JSON");
    enforce.csm.add_to(c_enf);
    c_enf->callback(guarded([&enforce](bool j) { return enforce.run(j); }));

    TuneCmd tune;
    auto* c_tune = app.add_subcommand("tune", "Search lambda_dev and lambda_smooth for a trajectory");
    c_tune->add_option("--trajectory", tune.trajectory)->required()->check(CLI::ExistingFile);
    c_tune->add_option("--scene", tune.scene)->required()->check(CLI::ExistingFile);
    c_tune->add_option("--profile", tune.profile)->required()->check(CLI::ExistingFile);
    c_tune->add_option("--trials", tune.trials)->check(CLI::PositiveNumber);
    c_tune->add_option("--seed", tune.seed);
    c_tune->add_option("--sampler", tune.sampler)->check(CLI::IsMember({"tpe", "random"}));
    c_tune->callback(guarded([&tune](bool j) { return tune.run(j); }));

    ServeCmd serve;
    auto* c_serve = app.add_subcommand("serve", "Run the HTTP API");
    c_serve->add_option("--bind", serve.bind, "host:port (port 0 picks a free one)");
    c_serve->add_option("--sessions", serve.sessions, "Session store directory");
    c_serve->add_option("--ui", serve.ui, "Serve static UI assets from this directory")->check(CLI::ExistingDirectory);
    c_serve->add_option("--cors", serve.cors, "Access-Control-Allow-Origin value");
    c_serve->add_option("--timeout", serve.timeout_s, "Socket read/write timeout in seconds")->check(CLI::PositiveNumber);
    serve.backend.add_to(c_serve);
    c_serve->callback(guarded([&serve](bool j) { return serve.run(j); }));

    auto* c_session = app.add_subcommand("session", "Session transcripts");
    c_session->require_subcommand(1);
    SessionReplayCmd sreplay;
    auto* c_sreplay = c_session->add_subcommand("replay", "Recompute a saved session and diff it");
    c_sreplay->add_option("file", sreplay.file)->required()->check(CLI::ExistingFile);
    sreplay.backend.add_to(c_sreplay);
    c_sreplay->callback(guarded([&sreplay](bool j) { return sreplay.run(j); }));

    PlotCmd plot;
    auto* c_plot = app.add_subcommand("plot", "Emit plot arrays for one turn of a saved session");
    c_plot->add_option("--session", plot.file)->required()->check(CLI::ExistingFile);
    c_plot->add_option("--turn", plot.turn);
    c_plot->add_option("--out", plot.out, "Write to a file instead of stdout");
    c_plot->callback(guarded([&plot](bool j) { return plot.run(j); }));

    auto* c_policy = app.add_subcommand("policy", "TrajScript programs");
    c_policy->require_subcommand(1);
    PolicyRunCmd prun;
    auto* c_prun = c_policy->add_subcommand("run", "Execute a program against a trajectory");
    c_prun->add_option("--program", prun.program)->required()->check(CLI::ExistingFile);
    c_prun->add_option("--trajectory", prun.trajectory)->required()->check(CLI::ExistingFile);
    c_prun->add_option("--scene", prun.scene)->check(CLI::ExistingFile);
    c_prun->add_option("--budget", prun.budget, "Step budget");
    c_prun->callback(guarded([&prun](bool j) { return prun.run(j); }));
    PolicyFmtCmd pfmt;
    auto* c_pfmt = c_policy->add_subcommand("fmt", "Print a program in canonical form");
    c_pfmt->add_option("file", pfmt.file)->required()->check(CLI::ExistingFile);
    c_pfmt->add_flag("--check", pfmt.check, "Fail unless the file is already canonical");
    c_pfmt->callback(guarded([&pfmt](bool j) { return pfmt.run(j); }));
    auto* c_pcat = c_policy->add_subcommand("catalog", "List the builtin functions");
    c_pcat->callback(guarded([](bool j) { return policy_catalog(j); }));

    auto* c_data = app.add_subcommand("dataset", "Dataset samples");
    c_data->require_subcommand(1);
    DatasetValidateCmd dval;
    auto* c_dval = c_data->add_subcommand("validate", "Check samples against the schema");
    c_dval->add_option("paths", dval.targets, "Sample files or directories")->required();
    c_dval->callback(guarded([&dval](bool j) { return dval.run(j); }));
    DatasetRunCmd drun;
    auto* c_drun = c_data->add_subcommand("run", "Run every sample as a session and report executability");
    c_drun->add_option("path", drun.target, "Sample file or directory")->required();
    c_drun->add_option("--golden", drun.golden, "Directory of golden session transcripts to compare against");
    c_drun->add_flag("--update-golden", drun.update, "Rewrite the golden transcripts instead of comparing");
    c_drun->add_option("--record", drun.record, "Write the exchanged prompts as a replay transcript");
    c_drun->add_option("--script", drun.script, "Answer from a scripted response table instead of a backend")
        ->check(CLI::ExistingFile);
    drun.backend.add_to(c_drun);
    c_drun->callback(guarded([&drun](bool j) { return drun.run(j); }));

    // Block shutdown signals before any thread exists so `serve` can sigwait for them.
    const sigset_t sigs = shutdown_signals();
    pthread_sigmask(SIG_BLOCK, &sigs, nullptr);
    const bool serving = [&] {
        for (int i = 1; i < argc; ++i) {
            if (std::string(argv[i]) == "serve") return true;
        }
        return false;
    }();
    if (!serving) pthread_sigmask(SIG_UNBLOCK, &sigs, nullptr);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        if (as_json) {
            std::cout << json{{"error", {{"code", e.code()}, {"message", e.what()}}}}.dump() << "\n";
        }
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}
