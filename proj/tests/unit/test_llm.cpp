#include "ovita/llm/gateway.hpp"
#include "ovita/policy/parser.hpp"

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

using namespace ovita;
using namespace ovita::llm;

namespace {

Trajectory path3() {
    return Trajectory({{0.0, 0.0, 0.5, 0.2}, {0.5, 0.5, 0.5, 0.3}, {1.0, 1.0, 0.4, 0.1}});
}

Scene cup_scene() {
    return Scene({SceneObject{"cup", Vec3(1, 2, 0), Vec3(0.1, 0.1, 0.2), {{"color", "red"}}}}, "a kitchen table");
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("ovita_test_llm_" + name);
}

// Scoped environment override.
struct EnvVar {
    std::string name;
    EnvVar(std::string n, const char* value) : name(std::move(n)) {
        if (value) {
            ::setenv(name.c_str(), value, 1);
        } else {
            ::unsetenv(name.c_str());
        }
    }
    ~EnvVar() { ::unsetenv(name.c_str()); }
};

}  // namespace

TEST_CASE("ground places scene objects in the user prompt") {
    const GroundedPrompt p = ground("go around the cup", cup_scene(), path3());
    CHECK(p.user.find("cup") != std::string::npos);
    CHECK(p.user.find("- cup: center (1, 2, 0)") != std::string::npos);
    CHECK(p.user.find("color: red") != std::string::npos);
    CHECK(p.user.find("a kitchen table") != std::string::npos);
    CHECK(p.user.find("go around the cup") != std::string::npos);
    CHECK(p.user.find("3 waypoints") != std::string::npos);
    CHECK(p.parts.object_table.find("dimensions (0.1, 0.1, 0.2)") != std::string::npos);
}

TEST_CASE("every placeholder is resolved") {
    for (bool ex : {true, false}) {
        const GroundedPrompt p = ground("x", cup_scene(), path3(), {ex});
        CHECK(p.system.find("{{") == std::string::npos);
        CHECK(p.user.find("{{") == std::string::npos);
        CHECK(p.system.find("}}") == std::string::npos);
    }
    const auto prog = policy::parse("let k = 0.2;\ntranslate(axis=\"z\", by=k);\n");
    const GroundedPrompt e = explain_prompt(prog, "raise it");
    CHECK(e.user.find("{{") == std::string::npos);
}

TEST_CASE("function definitions list the whole catalog") {
    const GroundedPrompt p = ground("x", cup_scene(), path3());
    for (const char* name : {"translate(", "approach(", "insert_spiral(", "get_trajectory(", "noise(", "sqrt("}) {
        CHECK_MESSAGE(p.system.find(std::string("- ") + name) != std::string::npos, name);
    }
}

TEST_CASE("examples toggle removes exactly the example block") {
    const GroundedPrompt with = ground("x", cup_scene(), path3(), {true});
    const GroundedPrompt without = ground("x", cup_scene(), path3(), {false});
    CHECK(with.user == without.user);
    CHECK(without.parts.examples.empty());
    const std::string block(template_text("examples.txt"));
    REQUIRE(!block.empty());
    const auto at = with.system.find(block);
    REQUIRE(at != std::string::npos);
    std::string removed = with.system;
    removed.erase(at, block.size());
    CHECK(removed == without.system);
    CHECK(prompt_hash(with) != prompt_hash(without));
}

TEST_CASE("empty scene matches the golden prompt") {
    const GroundedPrompt p = ground("move the end effector up by 5 cm", Scene(), path3());
    CHECK(p.parts.object_table == "no objects detected");
    CHECK(p.parts.scene_description == "none provided");
    const std::string rendered = "=== system ===\n" + p.system + "\n=== user ===\n" + p.user + "\n";
    const std::filesystem::path golden = std::filesystem::path(OVITA_TEST_FIXTURES) / "empty_scene_prompt.txt";
    if (std::getenv("OVITA_UPDATE_GOLDEN")) {
        std::ofstream(golden, std::ios::binary) << rendered;
    }
    REQUIRE(std::filesystem::exists(golden));
    CHECK(slurp(golden) == rendered);
}

TEST_CASE("ground is pure") {
    const GroundedPrompt a = ground("slow down near the cup", cup_scene(), path3());
    const GroundedPrompt b = ground("slow down near the cup", cup_scene(), path3());
    CHECK(a.system == b.system);
    CHECK(a.user == b.user);
    CHECK(prompt_hash(a) == prompt_hash(b));
    CHECK(prompt_hash(a).size() == 64);
}

TEST_CASE("empty instruction is rejected") {
    CHECK_THROWS_AS(ground("", cup_scene(), path3()), EmptyInstruction);
    CHECK_THROWS_AS(ground(" \n\t", cup_scene(), path3()), EmptyInstruction);
}

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(prompt_hash("a", "b") == sha256_hex("a\n\nb"));
}

TEST_CASE("parse_response accepts well-formed output") {
    SUBCASE("bare object") {
        const auto r = parse_response(R"({"plan": "1. raise", "code": "translate(axis=\"z\", by=0.1);"})");
        REQUIRE(r.parse_ok);
        CHECK(r.plan == "1. raise");
        CHECK(r.code == "translate(axis=\"z\", by=0.1);");
    }
    SUBCASE("fenced with prose") {
        const auto r = parse_response(
            "Sure, here it is.\n```json\n{\"plan\": \"p\", \"code\": \"let a = {1};\"}\n```\nDone.");
        REQUIRE(r.parse_ok);
        CHECK(r.plan == "p");
        CHECK(r.code == "let a = {1};");
    }
    SUBCASE("code as list of lines") {
        const auto r = parse_response(R"({"plan": ["1. a", "2. b"], "code": ["let a = 1;", "log(\"x\");"]})");
        REQUIRE(r.parse_ok);
        CHECK(r.plan == "1. a\n2. b");
        CHECK(r.code == "let a = 1;\nlog(\"x\");");
    }
    SUBCASE("object after an unrelated one") {
        const auto r = parse_response(R"(meta {"note": 1} then {"plan": "p", "code": "c"})");
        REQUIRE(r.parse_ok);
        CHECK(r.code == "c");
    }
}

TEST_CASE("parse_response rejects malformed output without throwing") {
    const std::vector<std::string> bad = {
        "",
        "no json here",
        "{",
        "}",
        "{\"plan\": \"p\"}",
        "{\"code\": \"c\"}",
        "{\"plan\": \"p\", \"code\": \"\"}",
        "{\"plan\": \"  \", \"code\": \"c\"}",
        "{\"plan\": 3, \"code\": \"c\"}",
        "{\"plan\": \"p\", \"code\": null}",
        "{\"plan\": \"p\", \"code\": [1, 2]}",
        "[\"plan\", \"code\"]",
        "{\"plan\": \"p\", \"code\": \"c\"",
        "```json\n{\"plan\": \"p\",\n```",
        "```",
        "{\"plan\": \"p\" \"code\": \"c\"}",
        "{'plan': 'p', 'code': 'c'}",
        std::string(10000, '{'),
        std::string("{\"plan\": \"p\", \"code\": \"\xff\xfe\"}"),
        "{\"plan\": \"\\u12\", \"code\": \"c\"}",
    };
    REQUIRE(bad.size() == 20);
    for (const auto& s : bad) {
        ModelResponse r;
        CHECK_NOTHROW(r = parse_response(s));
        CHECK_MESSAGE(!r.parse_ok, s.substr(0, 40));
        CHECK(r.raw == s);
    }
}

TEST_CASE("replay backend") {
    const GroundedPrompt p = ground("raise", cup_scene(), path3());
    const std::string response = R"({"plan": "1. raise", "code": "translate(axis=\"z\", by=0.05);"})";
    const auto file = temp_file("replay.jsonl");
    write_transcript(file.string(), {{prompt_hash(p), response}});

    BackendConfig cfg;
    cfg.kind = BackendKind::Replay;
    cfg.replay_path = file.string();
    const ModelResponse r = complete(p, cfg);
    CHECK(r.parse_ok);
    CHECK(r.raw == response);

    const GroundedPrompt other = ground("lower", cup_scene(), path3());
    try {
        complete(other, cfg);
        FAIL("expected ReplayMiss");
    } catch (const ReplayMiss& e) {
        CHECK(e.hash() == prompt_hash(other));
        CHECK(e.code() == "replay_miss");
    }
    std::filesystem::remove(file);
}

TEST_CASE("transcripts round trip and reject conflicts") {
    const auto file = temp_file("conflict.jsonl");
    const std::map<std::string, std::string> entries = {{"aa", "one"}, {"bb", "two\nlines"}};
    write_transcript(file.string(), entries);
    CHECK(read_transcript(file.string()) == entries);
    {
        std::ofstream out(file, std::ios::app);
        out << "\n" << R"({"prompt_sha256": "aa", "response": "one"})" << "\n";
    }
    CHECK(read_transcript(file.string()) == entries);
    {
        std::ofstream out(file, std::ios::app);
        out << R"({"prompt_sha256": "aa", "response": "different"})" << "\n";
    }
    CHECK_THROWS_AS(read_transcript(file.string()), SchemaViolation);
    std::filesystem::remove(file);
    CHECK_THROWS_AS(read_transcript(file.string()), IoError);
}

TEST_CASE("recording backend captures exchanges") {
    const GroundedPrompt p = ground("raise", cup_scene(), path3());
    auto inner = std::make_shared<ReplayBackend>(std::map<std::string, std::string>{{prompt_hash(p), "resp"}});
    RecordingBackend rec(inner);
    CHECK(rec.complete_raw(p) == "resp");
    CHECK(rec.entries().size() == 1);
    CHECK(rec.entries().at(prompt_hash(p)) == "resp");
}

TEST_CASE("backend config json") {
    BackendConfig c;
    c.kind = BackendKind::Http;
    c.temperature = 0.7;
    const BackendConfig back = backend_config_from_json(to_json(c));
    CHECK(back.kind == BackendKind::Http);
    CHECK(back.temperature == 0.7);
    CHECK(back.model == c.model);
    CHECK_THROWS_AS(backend_config_from_json({{"kind", "http"}, {"bogus", 1}}), SchemaViolation);
    CHECK_THROWS_AS(backend_config_from_json({{"kind", "http"}, {"temperature", 2.0}}), SchemaViolation);
    CHECK_THROWS_AS(backend_config_from_json({{"kind", "carrier pigeon"}}), SchemaViolation);
    CHECK_THROWS_AS(backend_config_from_json({{"kind", "replay"}}), SchemaViolation);
}

namespace {

// Local chat-completions stand-in: answers 429 `throttle` times, then 200.
struct FakeServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> hits{0};
    std::string seen_auth;
    nlohmann::json seen_body;

    explicit FakeServer(int throttle) {
        server.Post("/v1/chat/completions", [this, throttle](const httplib::Request& req, httplib::Response& res) {
            const int n = ++hits;
            if (n <= throttle) {
                res.status = 429;
                return;
            }
            seen_auth = req.get_header_value("Authorization");
            seen_body = nlohmann::json::parse(req.body);
            nlohmann::json reply = {
                {"choices", {{{"message", {{"role", "assistant"}, {"content", R"({"plan":"p","code":"c"})"}}}}}}};
            res.set_content(reply.dump(), "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~FakeServer() {
        server.stop();
        thread.join();
    }
    BackendConfig config() const {
        BackendConfig c;
        c.kind = BackendKind::Http;
        c.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
        c.api_key_env = "OVITA_TEST_KEY";
        c.timeout = std::chrono::milliseconds(5000);
        return c;
    }
};

}  // namespace

TEST_CASE("http backend retries after 429") {
    EnvVar key("OVITA_TEST_KEY", "sk-test");
    FakeServer fake(1);
    std::vector<std::chrono::milliseconds> sleeps;
    HttpBackend backend(fake.config(), [&](std::chrono::milliseconds d) { sleeps.push_back(d); });
    const GroundedPrompt p = ground("raise", cup_scene(), path3());
    const ModelResponse r = complete(p, backend);
    CHECK(r.parse_ok);
    CHECK(r.code == "c");
    CHECK(backend.last_attempts() == 2);
    REQUIRE(sleeps.size() == 1);
    CHECK(sleeps[0] == std::chrono::milliseconds(500));
    CHECK(fake.seen_auth == "Bearer sk-test");
    CHECK(fake.seen_body["model"] == "gpt-4o");
    CHECK(fake.seen_body["temperature"] == 0.2);
    CHECK(fake.seen_body["messages"][0]["content"] == p.system);
    CHECK(fake.seen_body["messages"][1]["content"] == p.user);
}

TEST_CASE("http backend gives up after max retries") {
    EnvVar key("OVITA_TEST_KEY", "sk-test");
    FakeServer fake(100);
    BackendConfig cfg = fake.config();
    cfg.max_retries = 2;
    std::vector<std::chrono::milliseconds> sleeps;
    HttpBackend backend(cfg, [&](std::chrono::milliseconds d) { sleeps.push_back(d); });
    try {
        backend.complete_raw(ground("raise", cup_scene(), path3()));
        FAIL("expected Network");
    } catch (const Network& e) {
        CHECK(e.status() == 429);
    }
    CHECK(backend.last_attempts() == 3);
    CHECK(sleeps == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(500),
                                                           std::chrono::milliseconds(1000)});
}

TEST_CASE("http backend without a key") {
    EnvVar key("OVITA_TEST_KEY", nullptr);
    FakeServer fake(0);
    HttpBackend backend(fake.config(), [](std::chrono::milliseconds) {});
    CHECK_THROWS_AS(backend.complete_raw(ground("raise", cup_scene(), path3())), AuthMissing);
    CHECK(fake.hits == 0);
    EnvVar empty("OVITA_TEST_KEY", "");
    CHECK_THROWS_AS(backend.complete_raw(ground("raise", cup_scene(), path3())), AuthMissing);
}

TEST_CASE("http backend reports unreachable hosts") {
    EnvVar key("OVITA_TEST_KEY", "sk-test");
    int port = 0;
    {
        FakeServer fake(0);
        port = fake.port;
    }
    BackendConfig cfg;
    cfg.kind = BackendKind::Http;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.api_key_env = "OVITA_TEST_KEY";
    cfg.max_retries = 1;
    cfg.timeout = std::chrono::milliseconds(1000);
    HttpBackend backend(cfg, [](std::chrono::milliseconds) {});
    try {
        backend.complete_raw(ground("raise", cup_scene(), path3()));
        FAIL("expected Network");
    } catch (const Network& e) {
        CHECK(e.status() == -1);
    }
    CHECK(backend.last_attempts() == 2);
}

TEST_CASE("explain prompt carries hyperparameters") {
    const auto prog = policy::parse("let k = 0.2;\nlet label = \"cup\";\napproach(label=label, offset=k);\n");
    const GroundedPrompt e = explain_prompt(prog, "1. approach the cup");
    CHECK(e.user.find("- k = 0.2") != std::string::npos);
    CHECK(e.user.find("- label = \"cup\"") != std::string::npos);
    CHECK(e.user.find("1. approach the cup") != std::string::npos);
    CHECK(e.user.find("approach(label=label, offset=k);") != std::string::npos);
    CHECK(e.system.find("Hyperparameters") != std::string::npos);

    ReplayBackend backend(std::map<std::string, std::string>{{prompt_hash(e), "k = 0.2 sets the approach offset"}});
    const std::string text = explain(prog, "1. approach the cup", backend);
    CHECK(text.find("0.2") != std::string::npos);

    const GroundedPrompt none = explain_prompt(policy::parse("translate(axis=\"z\", by=0.1);"), "");
    CHECK(none.user.find("none extracted") != std::string::npos);
    CHECK(none.user.find("none given") != std::string::npos);
}

TEST_CASE("environment overrides backend config") {
    std::map<std::string, std::string> env = {{"OVITA_BACKEND", "http"},   {"OVITA_MODEL", "m2"},
                                              {"OVITA_TEMPERATURE", "0.5"}, {"OVITA_REPLAY", ""},
                                              {"OVITA_API_KEY_ENV", "MY_KEY"}};
    auto lookup = [&env](const char* n) -> const char* {
        const auto it = env.find(n);
        return it == env.end() ? nullptr : it->second.c_str();
    };
    llm::BackendConfig base;
    base.replay_path = "keep.jsonl";
    const auto c = llm::apply_env(base, lookup);
    CHECK(c.kind == llm::BackendKind::Http);
    CHECK(c.model == "m2");
    CHECK(c.temperature == 0.5);
    CHECK(c.replay_path == "keep.jsonl");
    CHECK(c.api_key_env == "MY_KEY");
    CHECK(c.endpoint == base.endpoint);

    env["OVITA_TEMPERATURE"] = "hot";
    CHECK_THROWS_AS(llm::apply_env(base, lookup), SchemaViolation);
    env["OVITA_TEMPERATURE"] = "0.1";
    env["OVITA_BACKEND"] = "magic";
    CHECK_THROWS_AS(llm::apply_env(base, lookup), InvalidArgument);
}
