#include "orchestrate/cli/render.hpp"

#include <array>
#include <cstdio>
#include <sstream>

#include "orchestrate/clock.hpp"

namespace orchestrate::cli {

using nlohmann::json;

namespace {

constexpr std::array<int, 6> kPalette = {32, 34, 35, 36, 33, 31};

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

std::string str_or_dash(const json& j) {
    if (j.is_null()) return "-";
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_float()) return format_value(j.get<double>());
    return j.dump();
}

std::string short_run_id(const std::string& run_id) {
    const auto pos = run_id.rfind('-');
    return pos == std::string::npos ? run_id : run_id.substr(pos + 1);
}

std::string pool_line(const std::string& kind, int nodes, const std::string& type, int gpus, int cpus, int min_nodes,
                      int max_nodes) {
    std::ostringstream out;
    out << kind << " pool: " << nodes << " × " << type << ", " << gpus << " GPUs, " << cpus << " CPUs (min "
        << min_nodes << ", max " << max_nodes << ")\n";
    return out.str();
}

}  // namespace

std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string format_assignment(const json& assignment) {
    std::string out;
    for (const auto& [name, value] : assignment.items()) {
        if (!out.empty()) out += ", ";
        out += name + "=" + str_or_dash(value);
    }
    return out;
}

std::string render_cluster_created(const provider::ClusterState& c) {
    std::string out = "cluster " + c.name + " created\n";
    for (const auto& p : c.pools) {
        const int n = static_cast<int>(p.nodes.size());
        out += pool_line(std::string(provider::to_string(p.kind)), n, p.instance_type, n * p.capacity.gpus,
                         n * p.capacity.cpus, p.min_nodes, p.max_nodes);
    }
    out += "total: " + std::to_string(c.node_count()) + " nodes, " + std::to_string(c.total_gpus()) + " GPUs, " +
           std::to_string(c.total_cpus()) + " CPUs\n";
    return out;
}

std::string render_cluster_destroyed(const provider::DestroyReport& r) {
    return "cluster " + r.cluster_name + " destroyed\n" + "runs killed: " + std::to_string(r.runs_killed) + "\n" +
           "log records deleted: " + std::to_string(r.logs_deleted) + "\n" +
           "experiments retained: " + std::to_string(r.experiments_retained) + "\n";
}

json cluster_status_offline(const provider::ClusterState& c) {
    json pools = json::array();
    for (const auto& p : c.pools) {
        json nodes = json::array();
        for (const auto& n : p.nodes) {
            nodes.push_back({{"id", n.id},
                             {"capacity", {{"cpus", n.capacity.cpus}, {"gpus", n.capacity.gpus}}},
                             {"allocated", {{"cpus", 0}, {"gpus", 0}}},
                             {"resident_runs", 0}});
        }
        pools.push_back({{"kind", std::string(provider::to_string(p.kind))},
                         {"instance_type", p.instance_type},
                         {"min_nodes", p.min_nodes},
                         {"max_nodes", p.max_nodes},
                         {"node_count", p.nodes.size()},
                         {"nodes", nodes}});
    }
    return {{"name", c.name},
            {"cloud_provider", c.cloud_provider},
            {"controller", nullptr},
            {"pools", pools},
            {"totals",
             {{"nodes", c.node_count()},
              {"gpus", c.total_gpus()},
              {"cpus", c.total_cpus()},
              {"allocated_gpus", 0},
              {"allocated_cpus", 0}}},
            {"allocations", json::object()},
            {"queued_runs", 0},
            {"live_runs", 0},
            {"active_experiments", json::array()}};
}

std::string render_cluster_status(const json& s) {
    std::ostringstream out;
    out << "cluster: " << s["name"].get<std::string>() << "\n";
    const json& ctl = s["controller"];
    if (ctl.is_null() || ctl["endpoint"].is_null()) {
        out << "controller: not running\n";
    } else {
        char uptime[32];
        std::snprintf(uptime, sizeof uptime, "%.1f", ctl["uptime_s"].get<double>());
        out << "controller: " << ctl["endpoint"].get<std::string>() << " (pid " << str_or_dash(ctl["pid"])
            << ", up " << uptime << "s)\n";
    }
    for (const auto& p : s["pools"]) {
        out << p["kind"].get<std::string>() << " pool: " << p["node_count"].get<int>() << " × "
            << p["instance_type"].get<std::string>() << " (min " << p["min_nodes"].get<int>() << ", max "
            << p["max_nodes"].get<int>() << ")\n";
    }
    const json& t = s["totals"];
    out << "gpus: " << t["allocated_gpus"].get<int>() << "/" << t["gpus"].get<int>() << " allocated\n";
    out << "cpus: " << t["allocated_cpus"].get<int>() << "/" << t["cpus"].get<int>() << " allocated\n";
    out << "runs: " << s["live_runs"].get<int>() << " live, " << s["queued_runs"].get<int>() << " queued\n";
    out << pad("NODE", 10) << pad("GPUS", 7) << pad("CPUS", 7) << "RUNS\n";
    for (const auto& p : s["pools"]) {
        for (const auto& n : p["nodes"]) {
            out << pad(n["id"].get<std::string>(), 10)
                << pad(std::to_string(n["allocated"]["gpus"].get<int>()) + "/" +
                           std::to_string(n["capacity"]["gpus"].get<int>()),
                       7)
                << pad(std::to_string(n["allocated"]["cpus"].get<int>()) + "/" +
                           std::to_string(n["capacity"]["cpus"].get<int>()),
                       7)
                << n["resident_runs"].get<int>() << "\n";
        }
    }
    return out.str();
}

std::string render_experiment_status(const json& s) {
    std::ostringstream out;
    out << "experiment: " << s["id"].get<std::string>() << "\n";
    out << "name: " << s["name"].get<std::string>() << "\n";
    out << "state: " << s["state"].get<std::string>() << "\n";
    out << "cluster: " << s["cluster_name"].get<std::string>()
        << (s["cluster_destroyed"].get<bool>() ? " (destroyed)" : "") << "\n";
    out << "strategy: " << s["strategy"].get<std::string>() << "\n";
    const json& b = s["budget"];
    out << "completed " << b["completed"].get<int>() << "/" << b["total"].get<int>() << " ("
        << b["failed"].get<int>() << " failed)\n";
    if (s["best"].is_null()) {
        out << "best: none\n";
    } else {
        out << "best: " << format_value(s["best"]["value"].get<double>()) << " at "
            << format_assignment(s["best"]["assignment"]) << "\n";
    }
    if (s["cluster_destroyed"].get<bool>()) {
        out << "runs: (cluster destroyed)\n";
        return out.str();
    }
    const json& r = s["runs"];
    out << "runs: " << r["queued"].get<int>() << " queued, " << r["scheduled"].get<int>() << " scheduled, "
        << r["running"].get<int>() << " running, " << r["succeeded"].get<int>() << " succeeded, "
        << r["failed"].get<int>() << " failed, " << r["killed"].get<int>() << " killed\n";
    out << pad("RUN", 7) << pad("STATE", 11) << pad("NODE", 9) << pad("DURATION", 10) << pad("VALUE", 13)
        << "REASON\n";
    for (const auto& run : s["run_table"]) {
        out << pad(run["short_id"].get<std::string>(), 7) << pad(run["state"].get<std::string>(), 11)
            << pad(str_or_dash(run["node_id"]), 9)
            << pad(format_duration_us(run["duration_us"].get<std::int64_t>()), 10)
            << pad(run["value"].is_null() ? "-" : format_value(run["value"].get<double>()), 13)
            << str_or_dash(run["reason"]) << "\n";
    }
    return out.str();
}

int run_color(const std::string& run_id) {
    const std::string short_id = short_run_id(run_id);
    long index = 0;
    if (short_id.size() > 1 && short_id[0] == 'r') index = std::strtol(short_id.c_str() + 1, nullptr, 10);
    return kPalette[static_cast<std::size_t>(index) % kPalette.size()];
}

std::string render_log_line(const store::LogRecord& r, bool color) {
    const std::string prefix = short_run_id(r.run_id) + " " + std::string(store::to_string(r.stream)) + "|";
    if (!color) return prefix + " " + r.line + "\n";
    return "\x1b[" + std::to_string(run_color(r.run_id)) + "m" + prefix + "\x1b[0m " + r.line + "\n";
}

}  // namespace orchestrate::cli
