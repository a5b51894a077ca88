#include "orchestrate/executor/run_spec.hpp"

#include "orchestrate/json_fields.hpp"

namespace orchestrate::executor {

namespace jf = json_fields;
using nlohmann::json;

std::string_view to_string(Disposition d) {
    switch (d) {
        case Disposition::succeeded: return "succeeded";
        case Disposition::failed: return "failed";
        case Disposition::killed: return "killed";
    }
    return "?";
}

RunSpec parse_run_spec(const json& j, const std::string& path) {
    if (!j.is_object()) jf::fail(path, "expected a mapping");
    RunSpec spec;
    const json& cmd = jf::require(j, "command", path);
    const std::string cp = jf::join(path, "command");
    if (cmd.is_string()) {
        spec.command.push_back(cmd.get<std::string>());
    } else if (cmd.is_array()) {
        for (std::size_t i = 0; i < cmd.size(); ++i) spec.command.push_back(jf::as_string(cmd[i], jf::index(cp, i)));
    } else {
        jf::fail(cp, "expected a list of arguments");
    }
    if (spec.command.empty() || spec.command.front().empty()) jf::fail(cp, "command must not be empty");
    if (const json* w = jf::optional(j, "workdir")) spec.workdir = jf::as_string(*w, jf::join(path, "workdir"));
    if (const json* env = jf::optional(j, "env")) {
        if (!env->is_object()) jf::fail(jf::join(path, "env"), "expected a mapping");
        for (const auto& [k, v] : env->items()) {
            if (v.is_string()) spec.env[k] = v.get<std::string>();
            else if (v.is_number() || v.is_boolean()) spec.env[k] = v.dump();
            else jf::fail(jf::join(jf::join(path, "env"), k), "expected a scalar");
        }
    }
    if (const json* t = jf::optional(j, "timeout_seconds")) {
        const double secs = jf::as_number(*t, jf::join(path, "timeout_seconds"));
        if (!(secs > 0)) jf::fail(jf::join(path, "timeout_seconds"), "must be positive");
        spec.timeout = std::chrono::milliseconds(static_cast<long long>(secs * 1000));
    }
    return spec;
}

SyntheticSpec parse_synthetic_spec(const json& j, const std::string& path) {
    if (!j.is_object()) jf::fail(path, "expected a mapping");
    SyntheticSpec spec;
    spec.objective = jf::as_string(jf::require(j, "objective", path), jf::join(path, "objective"));
    if (spec.objective != "negated_quadratic" && spec.objective != "sphere" && spec.objective != "step_failure") {
        jf::fail(jf::join(path, "objective"),
                 "unknown objective '" + spec.objective + "' (expected negated_quadratic, sphere or step_failure)");
    }
    if (const json* p = jf::optional(j, "params")) {
        if (!p->is_object()) jf::fail(jf::join(path, "params"), "expected a mapping");
        spec.params = *p;
    }
    const std::string pp = jf::join(path, "params");
    if (const json* c = jf::optional(spec.params, "center")) jf::as_number(*c, jf::join(pp, "center"));
    if (const json* n = jf::optional(spec.params, "log_lines")) {
        if (jf::as_integer(*n, jf::join(pp, "log_lines")) < 0) jf::fail(jf::join(pp, "log_lines"), "must be non-negative");
    }
    if (spec.objective == "step_failure") {
        jf::as_string(jf::require(spec.params, "parameter", pp), jf::join(pp, "parameter"));
        jf::as_number(jf::require(spec.params, "fail_if_below", pp), jf::join(pp, "fail_if_below"));
    }
    if (const json* d = jf::optional(j, "duration_ms")) {
        const long long ms = jf::as_integer(*d, jf::join(path, "duration_ms"));
        if (ms < 0) jf::fail(jf::join(path, "duration_ms"), "must be non-negative");
        spec.duration = std::chrono::milliseconds(ms);
    }
    return spec;
}

json to_json(const RunSpec& spec) {
    json j = {{"command", spec.command}, {"workdir", spec.workdir}, {"env", spec.env}};
    if (spec.timeout) j["timeout_seconds"] = static_cast<double>(spec.timeout->count()) / 1000.0;
    return j;
}

json to_json(const SyntheticSpec& spec) {
    return {{"objective", spec.objective}, {"params", spec.params}, {"duration_ms", spec.duration.count()}};
}

}  // namespace orchestrate::executor
