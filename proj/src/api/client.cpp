#include "orchestrate/api/client.hpp"

#include <httplib.h>

#include "orchestrate/error.hpp"

namespace orchestrate::api {

using nlohmann::json;

namespace {

httplib::Client connect(const std::string& host, int port) {
    httplib::Client c(host, port);
    c.set_connection_timeout(std::chrono::seconds(2));
    c.set_read_timeout(std::chrono::seconds(120));
    c.set_write_timeout(std::chrono::seconds(30));
    return c;
}

[[noreturn]] void raise(const std::string& endpoint, const httplib::Result& r) {
    if (!r) {
        throw Error(ErrorKind::unavailable,
                    "controller unreachable at " + endpoint + " (" + httplib::to_string(r.error()) + ")");
    }
    try {
        const json body = json::parse(r->body);
        const json& e = body.at("error");
        throw Error(error_kind_from_string(e.value("kind", "internal")), e.value("message", ""),
                    e.value("field", ""));
    } catch (const json::exception&) {
        throw Error(ErrorKind::internal, "controller returned HTTP " + std::to_string(r->status));
    }
}

json expect(const std::string& endpoint, const httplib::Result& r) {
    if (!r || r->status < 200 || r->status >= 300) raise(endpoint, r);
    return json::parse(r->body);
}

std::string encode(const std::string& s) { return httplib::detail::encode_url(s); }

}  // namespace

ApiClient::ApiClient(std::string endpoint) : endpoint_(std::move(endpoint)) {
    const auto colon = endpoint_.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorKind::invalid_argument, "endpoint must be host:port");
    host_ = endpoint_.substr(0, colon);
    try {
        port_ = std::stoi(endpoint_.substr(colon + 1));
    } catch (const std::exception&) {
        throw Error(ErrorKind::invalid_argument, "endpoint must be host:port");
    }
}

bool ApiClient::reachable() const {
    auto c = connect(host_, port_);
    c.set_read_timeout(std::chrono::seconds(5));
    const auto r = c.Get("/v1/cluster/status");
    return r && r->status == 200;
}

std::string ApiClient::create_experiment(const json& config) const {
    auto c = connect(host_, port_);
    return expect(endpoint_, c.Post("/v1/experiments", config.dump(), "application/json")).at("id");
}

json ApiClient::list_experiments() const {
    auto c = connect(host_, port_);
    return expect(endpoint_, c.Get("/v1/experiments")).at("experiments");
}

json ApiClient::experiment_status(const std::string& id, bool include_history) const {
    auto c = connect(host_, port_);
    return expect(endpoint_, c.Get("/v1/experiments/" + encode(id) + (include_history ? "?history=1" : "")));
}

json ApiClient::stop_experiment(const std::string& id) const {
    auto c = connect(host_, port_);
    return expect(endpoint_, c.Post("/v1/experiments/" + encode(id) + "/stop"));
}

json ApiClient::cluster_status() const {
    auto c = connect(host_, port_);
    return expect(endpoint_, c.Get("/v1/cluster/status"));
}

json ApiClient::events(std::uint64_t since, int wait_ms) const {
    auto c = connect(host_, port_);
    return expect(endpoint_,
                  c.Get("/v1/events?since=" + std::to_string(since) + "&wait_ms=" + std::to_string(wait_ms)));
}

void ApiClient::stream_logs(const std::string& id, bool follow, std::uint64_t since_seq,
                            const std::function<bool(const store::LogRecord&)>& sink) const {
    auto c = connect(host_, port_);
    c.set_read_timeout(std::chrono::hours(24));
    std::string pending;
    std::string error_body;
    bool ok_status = true;
    bool stopped = false;
    const std::string path = "/v1/experiments/" + encode(id) + "/logs?since_seq=" + std::to_string(since_seq) +
                             (follow ? "&follow=1" : "");
    const auto r = c.Get(
        path,
        [&](const httplib::Response& res) {
            ok_status = res.status == 200;
            return true;
        },
        [&](const char* data, std::size_t len) {
            if (!ok_status) {
                error_body.append(data, len);
                return true;
            }
            pending.append(data, len);
            std::size_t start = 0;
            for (std::size_t nl; (nl = pending.find('\n', start)) != std::string::npos; start = nl + 1) {
                if (nl == start) continue;
                if (!sink(store::log_record_from_json(json::parse(pending.substr(start, nl - start))))) {
                    stopped = true;
                    return false;
                }
            }
            pending.erase(0, start);
            return true;
        });
    if (stopped) return;
    if (!r) raise(endpoint_, r);
    if (!ok_status) {
        httplib::Response copy = *r;
        copy.body = error_body;
        raise(endpoint_, httplib::Result(std::make_unique<httplib::Response>(copy), httplib::Error::Success));
    }
}

}  // namespace orchestrate::api
