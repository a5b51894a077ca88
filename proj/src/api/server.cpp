#include "orchestrate/api/server.hpp"

#include <httplib.h>

#include "orchestrate/error.hpp"

namespace orchestrate::api {

using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";
constexpr int kMaxWaitMs = 30'000;

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump() + "\n", kJson);
}

void reply_error(httplib::Response& res, const Error& e) {
    reply(res, http_status(e.kind()),
          {{"error", {{"kind", std::string(to_string(e.kind()))}, {"message", e.bare_message()}, {"field", e.field()}}}});
}

template <typename F>
httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            reply_error(res, e);
        } catch (const json::exception& e) {
            reply_error(res, Error(ErrorKind::invalid_argument, std::string("malformed request: ") + e.what()));
        } catch (const std::exception& e) {
            reply_error(res, Error(ErrorKind::internal, e.what()));
        }
    };
}

std::uint64_t uint_param(const httplib::Request& req, const std::string& name, std::uint64_t fallback) {
    if (!req.has_param(name)) return fallback;
    const std::string v = req.get_param_value(name);
    try {
        std::size_t used = 0;
        const auto n = std::stoull(v, &used);
        if (used == v.size()) return n;
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::invalid_argument, "must be a non-negative integer", name);
}

bool flag_param(const httplib::Request& req, const std::string& name) {
    if (!req.has_param(name)) return false;
    const std::string v = req.get_param_value(name);
    return v.empty() || v == "1" || v == "true";
}

}  // namespace

int http_status(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_argument: return 400;
        case ErrorKind::not_found: return 404;
        case ErrorKind::conflict: return 409;
        case ErrorKind::quota_exceeded: return 403;
        case ErrorKind::unschedulable: return 422;
        case ErrorKind::illegal_transition: return 409;
        case ErrorKind::unavailable: return 503;
        case ErrorKind::internal: return 500;
    }
    return 500;
}

ApiServer::ApiServer(controller::Controller& controller, store::StateRoot& store)
    : controller_(controller), store_(store), server_(std::make_unique<httplib::Server>()) {
    server_->new_task_queue = [] { return new httplib::ThreadPool(32); };
    server_->set_socket_options([](socket_t sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    });
    routes();
}

ApiServer::~ApiServer() { stop(); }

std::string ApiServer::start(int port) {
    const std::string host = "127.0.0.1";
    int bound = -1;
    if (port > 0 && server_->bind_to_port(host, port)) bound = port;
    if (bound < 0) bound = server_->bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorKind::unavailable, "cannot bind a loopback port");
    endpoint_ = host + ":" + std::to_string(bound);
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return endpoint_;
}

void ApiServer::stop() {
    if (!thread_.joinable()) return;
    server_->stop();
    thread_.join();
}

void ApiServer::routes() {
    auto& s = *server_;

    s.Post("/v1/experiments", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const json body = json::parse(req.body);
        const auto config = controller::parse_experiment_config(body);
        reply(res, 201, {{"id", controller_.create_experiment(config)}});
    }));

    s.Get("/v1/experiments", guarded([this](const httplib::Request&, httplib::Response& res) {
        reply(res, 200, {{"experiments", controller_.list_experiments()}});
    }));

    s.Get(R"(/v1/experiments/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        reply(res, 200, controller_.experiment_status(req.matches[1], flag_param(req, "history")));
    }));

    s.Post(R"(/v1/experiments/([^/]+)/stop)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto result = controller_.stop_experiment(req.matches[1]);
        reply(res, 200, {{"killed", result.killed}, {"status", result.status}});
    }));

    s.Get(R"(/v1/experiments/([^/]+)/logs)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        const auto record = store_.load_experiment(id);
        if (!store_.logs_available(record.cluster_name)) {
            throw Error(ErrorKind::unavailable, "logs unavailable: cluster destroyed");
        }
        if (record.cluster_name != controller_.cluster_name()) {
            throw Error(ErrorKind::invalid_argument, "experiment " + id + " runs on cluster '" + record.cluster_name +
                                                         "', not '" + controller_.cluster_name() + "'");
        }
        const bool follow = flag_param(req, "follow");
        auto cursor = std::make_shared<std::uint64_t>(uint_param(req, "since_seq", 0));
        res.status = 200;
        res.set_chunked_content_provider(
            "application/x-ndjson", [this, id, follow, cursor](std::size_t, httplib::DataSink& sink) {
                auto& hub = controller_.logs();
                for (;;) {
                    if (!sink.is_writable()) return false;
                    const bool drained = !follow || controller_.drained(id);
                    const auto batch = hub.since(id, *cursor, 512);
                    if (!batch.empty()) {
                        std::string out;
                        for (const auto& r : batch) out += store::to_json(r).dump() + "\n";
                        *cursor = batch.back().cursor + 1;
                        return sink.write(out.data(), out.size());
                    }
                    if (drained) {
                        sink.done();
                        return true;
                    }
                    hub.wait(id, *cursor, std::chrono::milliseconds(250));
                }
            });
    }));

    s.Get("/v1/cluster/status", guarded([this](const httplib::Request&, httplib::Response& res) {
        reply(res, 200, controller_.cluster_status());
    }));

    s.Get("/v1/events", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto since = uint_param(req, "since", 0);
        const auto wait_ms = std::min<std::uint64_t>(uint_param(req, "wait_ms", 0), kMaxWaitMs);
        auto& events = controller_.events();
        if (wait_ms > 0) events.wait(since, std::chrono::milliseconds(wait_ms));
        json list = json::array();
        for (const auto& e : events.since(since, 10'000)) list.push_back(controller::to_json(e));
        reply(res, 200, {{"events", list}, {"last_seq", events.last_seq()}, {"first_seq", events.first_seq()}});
    }));

    s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.status == 404 && res.body.empty()) {
            reply(res, 404, {{"error", {{"kind", "not_found"}, {"message", "no such endpoint"}, {"field", ""}}}});
        }
    });
}

}  // namespace orchestrate::api
