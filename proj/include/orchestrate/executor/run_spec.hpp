#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace orchestrate::executor {

/// How to evaluate one suggestion as a local process.
struct RunSpec {
    std::vector<std::string> command;
    std::string workdir;
    std::map<std::string, std::string> env;
    std::optional<std::chrono::milliseconds> timeout;
};

/// Built-in analytic objective evaluated in-process (no child process).
///
/// objectives:
///   negated_quadratic  value = -sum_p (x_p - center)^2 over numeric params;
///                      params.center: number (default 0.3)
///   sphere             value = -sum_p x_p^2
///   step_failure       fails when params.parameter < params.fail_if_below,
///                      otherwise behaves as negated_quadratic
/// params.log_lines (optional) makes each run emit that many stdout lines.
struct SyntheticSpec {
    std::string objective;
    nlohmann::json params = nlohmann::json::object();
    std::chrono::milliseconds duration{0};
};

enum class Disposition { succeeded, failed, killed };
std::string_view to_string(Disposition d);

/// Result of one evaluation. succeeded carries a value; failed and killed
/// never do.
struct Outcome {
    Disposition disposition = Disposition::failed;
    std::optional<double> value;
    std::string reason;
    std::optional<int> exit_code;
    std::chrono::microseconds duration{0};

    static Outcome succeeded(double v) { return {Disposition::succeeded, v, {}, 0, {}}; }
    static Outcome failed(std::string why, std::optional<int> code = std::nullopt) {
        return {Disposition::failed, std::nullopt, std::move(why), code, {}};
    }
    static Outcome killed(std::string why) { return {Disposition::killed, std::nullopt, std::move(why), {}, {}}; }
};

RunSpec parse_run_spec(const nlohmann::json& j, const std::string& path = "run");
SyntheticSpec parse_synthetic_spec(const nlohmann::json& j, const std::string& path = "synthetic");
nlohmann::json to_json(const RunSpec& spec);
nlohmann::json to_json(const SyntheticSpec& spec);

}  // namespace orchestrate::executor
