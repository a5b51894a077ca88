#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace orchestrate::cli {

struct CliEnv {
    std::ostream& out;
    std::ostream& err;
    /// Binary started for `controller serve` when a command needs a
    /// controller and none is running.
    std::filesystem::path self_exe;
    /// Colored log output; nullopt means "when stdout is a terminal".
    std::optional<bool> color;
};

/// Runs one `orchestrate` command line (args exclude the program name).
/// Returns the exit code: 0 success, 1 user error, 2 internal error.
int run_cli(const std::vector<std::string>& args, CliEnv& env);

}  // namespace orchestrate::cli
