#include <iostream>

#include "orchestrate/cli/app.hpp"

int main(int argc, char** argv) {
    orchestrate::cli::CliEnv env{std::cout, std::cerr, "/proc/self/exe", std::nullopt};
    std::error_code ec;
    if (auto exe = std::filesystem::read_symlink("/proc/self/exe", ec); !ec) env.self_exe = exe;
    return orchestrate::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc), env);
}
