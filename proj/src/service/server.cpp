#include "ovita/service/server.hpp"

#include "ovita/core/json_io.hpp"
#include "ovita/session/session.hpp"

#include <httplib.h>

#include <map>
#include <mutex>

namespace ovita::service {

using nlohmann::json;

namespace {

struct HttpError {
    int status;
    std::string code;
    std::string message;
    std::string path;
};

int status_for(const std::string& code) {
    static const std::map<std::string, int> table = {
        {"bad_request", 400},        {"schema_violation", 422}, {"invalid_argument", 422},
        {"empty_instruction", 422},  {"first_turn_must_be_original", 422},
        {"session_not_found", 404},  {"turn_not_found", 404},    {"not_found", 404},
        {"session_closed", 409},     {"nothing_to_explain", 409}, {"model_unavailable", 502},
        {"io_error", 500},           {"internal_error", 500},
    };
    const auto it = table.find(code);
    return it == table.end() ? 500 : it->second;
}

HttpError translate(const Error& e) {
    const std::string& c = e.code();
    if (c == "schema_violation") {
        const auto& s = static_cast<const SchemaViolation&>(e);
        return {422, c, e.what(), s.path()};
    }
    if (c == "replay_miss" || c == "network" || c == "auth_missing") return {502, "model_unavailable", e.what(), ""};
    if (status_for(c) != 500 || c == "io_error") return {status_for(c), c, e.what(), ""};
    // Domain errors with no dedicated HTTP meaning are argument problems of the request.
    return {422, "invalid_argument", e.what(), ""};
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const HttpError& e) {
    json err = {{"code", e.code}, {"message", e.message}};
    if (!e.path.empty()) err["path"] = e.path;
    send_json(res, e.status, {{"error", err}});
}

json parse_body(const httplib::Request& req) {
    json j = json::parse(req.body, nullptr, false);
    if (j.is_discarded()) throw HttpError{400, "bad_request", "request body is not valid JSON", ""};
    if (!j.is_object()) throw HttpError{400, "bad_request", "request body must be a JSON object", ""};
    return j;
}

const json& need(const json& body, const char* key) {
    const auto it = body.find(key);
    if (it == body.end()) throw HttpError{400, "bad_request", std::string("missing field \"") + key + "\"", key};
    return *it;
}

std::size_t turn_index(const std::string& s) {
    try {
        std::size_t used = 0;
        const unsigned long long k = std::stoull(s, &used);
        if (used == s.size()) return static_cast<std::size_t>(k);
    } catch (const std::exception&) {
    }
    throw HttpError{404, "turn_not_found", "turn index \"" + s + "\" is not a number", ""};
}

}  // namespace

std::pair<std::string, int> parse_bind(const std::string& bind) {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos || colon == 0) throw InvalidArgument("bind address must be host:port, got " + bind);
    const std::string port = bind.substr(colon + 1);
    int p = -1;
    try {
        std::size_t used = 0;
        p = std::stoi(port, &used);
        if (used != port.size()) p = -1;
    } catch (const std::exception&) {
    }
    if (p < 0 || p > 65535) throw InvalidArgument("bad port in bind address " + bind);
    return {bind.substr(0, colon), p};
}

struct Server::Impl {
    ServerConfig cfg;
    std::shared_ptr<llm::Backend> backend;
    session::Store store;
    httplib::Server http;
    std::mutex locks_mu;
    std::map<std::string, std::shared_ptr<std::mutex>> locks;
    int bound_port = -1;

    Impl(ServerConfig c, std::shared_ptr<llm::Backend> b)
        : cfg(std::move(c)), backend(std::move(b)), store(cfg.sessions_dir) {
        routes();
    }

    std::shared_ptr<std::mutex> lock_for(const std::string& id) {
        std::lock_guard<std::mutex> g(locks_mu);
        auto& m = locks[id];
        if (!m) m = std::make_shared<std::mutex>();
        return m;
    }

    // Runs `body`, turning every failure into a structured error response.
    template <class F>
    httplib::Server::Handler guarded(F body) {
        return [body](const httplib::Request& req, httplib::Response& res) {
            try {
                body(req, res);
            } catch (const HttpError& e) {
                send_error(res, e);
            } catch (const Error& e) {
                send_error(res, translate(e));
            } catch (const std::exception& e) {
                send_error(res, {500, "internal_error", e.what(), ""});
            }
        };
    }

    void routes() {
        http.set_read_timeout(cfg.turn_timeout);
        http.set_write_timeout(cfg.turn_timeout);
        http.set_default_headers({{"Access-Control-Allow-Origin", cfg.cors_origin},
                                  {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                  {"Access-Control-Allow-Headers", "Content-Type"}});
        if (cfg.ui_dir && !http.set_mount_point("/", cfg.ui_dir->string())) {
            throw IoError("UI directory " + cfg.ui_dir->string() + " does not exist");
        }

        http.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

        http.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"ok", true}});
        });

        http.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"sessions", store.list()}});
        }));

        http.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const json body = parse_body(req);
            csm::CsmConfig csm;
            if (const auto it = body.find("csm"); it != body.end()) csm = csm::config_from_json(*it, "csm");
            llm::GroundFlags flags;
            if (const auto it = body.find("include_examples"); it != body.end()) {
                flags.include_examples = io::require_bool(*it, "include_examples");
            }
            session::Session s = session::start(io::trajectory_from_json(need(body, "trajectory"), "trajectory"),
                                                io::scene_from_json(need(body, "scene"), "scene"),
                                                io::profile_from_json(need(body, "profile"), "profile"), csm, flags);
            store.save(s);
            send_json(res, 201, {{"id", s.id}});
        }));

        http.Get(R"(/sessions/([A-Za-z0-9_-]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            const auto m = lock_for(id);
            std::lock_guard<std::mutex> g(*m);
            send_json(res, 200, session::to_json(store.load(id)));
        }));

        http.Post(R"(/sessions/([A-Za-z0-9_-]+)/turns)",
                  guarded([this](const httplib::Request& req, httplib::Response& res) {
                      const std::string id = req.matches[1];
                      const json body = parse_body(req);
                      const std::string instruction = io::require_string(need(body, "instruction"), "instruction");
                      session::Context context = session::Context::Current;
                      try {
                          context = session::context_from_string(io::require_string(need(body, "context"), "context"));
                      } catch (const InvalidArgument& e) {
                          throw HttpError{422, "schema_violation", e.what(), "context"};
                      }
                      const auto m = lock_for(id);
                      std::lock_guard<std::mutex> g(*m);
                      session::Session s = store.load(id);
                      const session::Turn& t = session::adapt(s, instruction, context, *backend);
                      store.save(s);
                      send_json(res, 201, session::visualize_payload(s, t.index));
                  }));

        http.Get(R"(/sessions/([A-Za-z0-9_-]+)/turns/([^/]+)/view)",
                 guarded([this](const httplib::Request& req, httplib::Response& res) {
                     const std::string id = req.matches[1];
                     const std::size_t k = turn_index(req.matches[2]);
                     const auto m = lock_for(id);
                     std::lock_guard<std::mutex> g(*m);
                     send_json(res, 200, session::visualize_payload(store.load(id), k));
                 }));

        http.Get(R"(/sessions/([A-Za-z0-9_-]+)/turns/([^/]+)/plot)",
                 guarded([this](const httplib::Request& req, httplib::Response& res) {
                     const std::string id = req.matches[1];
                     const std::size_t k = turn_index(req.matches[2]);
                     const auto m = lock_for(id);
                     std::lock_guard<std::mutex> g(*m);
                     send_json(res, 200, session::emit_plot_data(session::visualize_payload(store.load(id), k)));
                 }));

        http.Post(R"(/sessions/([A-Za-z0-9_-]+)/turns/([^/]+)/explain)",
                  guarded([this](const httplib::Request& req, httplib::Response& res) {
                      const std::string id = req.matches[1];
                      const std::size_t k = turn_index(req.matches[2]);
                      const auto m = lock_for(id);
                      std::lock_guard<std::mutex> g(*m);
                      session::Session s = store.load(id);
                      if (k >= s.turns.size()) throw session::TurnNotFound(k, s.turns.size());
                      if (!s.turns[k].program) {
                          throw HttpError{409, "nothing_to_explain",
                                          "turn " + std::to_string(k) + " has no parsed program", ""};
                      }
                      const bool fresh = !s.turns[k].explanation;
                      const std::string text = session::explain(s, k, *backend);
                      if (fresh) store.save(s);
                      send_json(res, 200, {{"explanation", text}});
                  }));

        http.Post(R"(/sessions/([A-Za-z0-9_-]+)/close)",
                  guarded([this](const httplib::Request& req, httplib::Response& res) {
                      const std::string id = req.matches[1];
                      const auto m = lock_for(id);
                      std::lock_guard<std::mutex> g(*m);
                      session::Session s = store.load(id);
                      session::close(s);
                      store.save(s);
                      send_json(res, 200, {{"id", id}, {"status", session::to_string(s.status)}});
                  }));

        http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.status == 404 && res.body.empty()) {
                send_error(res, {404, "not_found", "no such endpoint", ""});
            }
        });
    }
};

Server::Server(ServerConfig cfg, std::shared_ptr<llm::Backend> backend)
    : impl_(std::make_unique<Impl>(std::move(cfg), std::move(backend))) {}

Server::~Server() { stop(); }

int Server::bind() {
    auto& i = *impl_;
    if (i.cfg.port == 0) {
        i.bound_port = i.http.bind_to_any_port(i.cfg.host);
    } else {
        i.bound_port = i.http.bind_to_port(i.cfg.host, i.cfg.port) ? i.cfg.port : -1;
    }
    if (i.bound_port < 0) throw BindFailure(i.cfg.host, i.cfg.port);
    return i.bound_port;
}

void Server::run() {
    if (impl_->bound_port < 0) bind();
    impl_->http.listen_after_bind();
}

void Server::stop() {
    if (impl_) impl_->http.stop();
}

bool Server::running() const { return impl_->http.is_running(); }

}  // namespace ovita::service
