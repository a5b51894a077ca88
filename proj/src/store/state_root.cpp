#include "orchestrate/store/state_root.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <random>
#include <sstream>

#include "orchestrate/error.hpp"

namespace orchestrate::store {

using nlohmann::json;

namespace {

constexpr const char* kMeta = "meta";
constexpr const char* kObservations = "observations";

std::string dump_line(const json& j) {
    return j.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
}

void fsync_path(const fs::path& p, int flags) {
    int fd = ::open(p.c_str(), flags);
    if (fd < 0) return;
    ::fsync(fd);
    ::close(fd);
}

void append_durably(const fs::path& file, const std::string& line) {
    int fd = ::open(file.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) throw Error(ErrorKind::internal, "cannot open " + file.string() + ": " + std::strerror(errno));
    std::size_t off = 0;
    while (off < line.size()) {
        ssize_t n = ::write(fd, line.data() + off, line.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            ::close(fd);
            throw Error(ErrorKind::internal, "write failed on " + file.string() + ": " + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
}

std::string to_base36(std::uint64_t v, std::size_t width) {
    static constexpr char digits[] = "0123456789abcdefghijklmnopqrstuvwxyz";
    std::string s;
    while (v) {
        s.insert(s.begin(), digits[v % 36]);
        v /= 36;
    }
    while (s.size() < width) s.insert(s.begin(), '0');
    return s;
}

}  // namespace

std::vector<optimizer::Observation> read_observations(const fs::path& file, const optimizer::ParameterSpace* space) {
    std::vector<optimizer::Observation> out;
    std::ifstream in(file, std::ios::binary);
    if (!in) return out;
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    while (pos < content.size()) {
        const std::size_t nl = content.find('\n', pos);
        if (nl == std::string::npos) break;  // torn trailing record
        try {
            out.push_back(observation_from_json(json::parse(content.substr(pos, nl - pos)), space));
        } catch (const std::exception&) {
            break;
        }
        pos = nl + 1;
    }
    return out;
}

StateRoot::StateRoot(fs::path path) : path_(std::move(path)) {
    std::error_code ec;
    if (fs::exists(path_, ec) && !fs::is_directory(path_, ec)) {
        throw Error(ErrorKind::invalid_argument, "state root " + path_.string() + " is not a directory");
    }
    fs::create_directories(experiments_dir(), ec);
    if (!ec) fs::create_directories(clusters_dir(), ec);
    if (ec) {
        throw Error(ErrorKind::invalid_argument, "cannot create state root " + path_.string() + ": " + ec.message());
    }
    if (::access(path_.c_str(), W_OK) != 0) {
        throw Error(ErrorKind::invalid_argument, "state root " + path_.string() + " is not writable");
    }
    for (const auto& entry : fs::directory_iterator(experiments_dir())) {
        if (!entry.is_directory() || !fs::exists(entry.path() / kMeta)) continue;
        const std::string id = entry.path().filename().string();
        experiments_.emplace(id, read_from_disk(id));
    }
}

StateRoot::~StateRoot() = default;

fs::path StateRoot::default_path() {
    if (const char* home = std::getenv("ORCHESTRATE_HOME"); home && *home) return home;
    const char* user_home = std::getenv("HOME");
    return fs::path(user_home && *user_home ? user_home : ".") / ".orchestrate";
}

std::vector<std::string> StateRoot::cluster_names() const {
    std::vector<std::string> names;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(clusters_dir(), ec)) {
        if (entry.is_directory() && fs::exists(entry.path() / "cluster.json")) {
            names.push_back(entry.path().filename().string());
        }
    }
    std::sort(names.begin(), names.end());
    return names;
}

bool StateRoot::has_cluster(const std::string& cluster) const {
    return !cluster.empty() && fs::exists(cluster_dir(cluster) / "cluster.json");
}

std::string StateRoot::new_experiment_id() const {
    using namespace std::chrono;
    const auto ms = duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(mu_);
    for (;;) {
        std::string id = to_base36(static_cast<std::uint64_t>(ms), 9) + "-" + to_base36(rng() % (36ULL * 36 * 36 * 36), 4);
        if (!experiments_.contains(id) && !fs::exists(experiments_dir() / id)) return id;
    }
}

std::vector<std::string> StateRoot::experiment_ids() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> ids;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(experiments_dir(), ec)) {
        if (entry.is_directory() && fs::exists(entry.path() / kMeta)) ids.push_back(entry.path().filename().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

ExperimentRecord StateRoot::read_from_disk(const std::string& id) const {
    const fs::path dir = experiments_dir() / id;
    std::ifstream in(dir / kMeta);
    if (!in) throw Error(ErrorKind::not_found, "experiment '" + id + "' not found");
    ExperimentRecord r;
    try {
        r = meta_from_json(json::parse(in));
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorKind::internal, "corrupt metadata for experiment '" + id + "': " + e.what());
    }
    r.observations = read_observations(dir / kObservations, &r.space);
    r.best = optimizer::best_assignment(r.observations);
    // A crash between the final append and the meta rewrite leaves a full
    // history on an active record.
    if (r.state == ExperimentState::active && r.observations.size() >= r.observation_budget) {
        r.state = ExperimentState::completed;
    }
    return r;
}

void StateRoot::write_atomically(const fs::path& target, const std::string& content) {
    const fs::path tmp = target.string() + ".tmp";
    {
        int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
        if (fd < 0) throw Error(ErrorKind::internal, "cannot write " + tmp.string() + ": " + std::strerror(errno));
        std::size_t off = 0;
        while (off < content.size()) {
            ssize_t n = ::write(fd, content.data() + off, content.size() - off);
            if (n < 0 && errno == EINTR) continue;
            if (n < 0) {
                ::close(fd);
                throw Error(ErrorKind::internal, "write failed on " + tmp.string());
            }
            off += static_cast<std::size_t>(n);
        }
        ::fsync(fd);
        ::close(fd);
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw Error(ErrorKind::internal, "cannot rename " + tmp.string() + ": " + ec.message());
    fsync_path(target.parent_path(), O_RDONLY | O_DIRECTORY);
}

void StateRoot::write_meta(const ExperimentRecord& r) const {
    write_atomically(experiments_dir() / r.id / kMeta, meta_to_json(r).dump(2) + "\n");
}

ExperimentRecord StateRoot::create_experiment(ExperimentRecord record) {
    std::lock_guard lock(mu_);
    if (record.id.empty()) throw Error(ErrorKind::internal, "experiment id must be set");
    const fs::path dir = experiments_dir() / record.id;
    if (experiments_.contains(record.id) || fs::exists(dir)) {
        throw Error(ErrorKind::conflict, "experiment '" + record.id + "' already exists");
    }
    record.state = ExperimentState::active;
    record.observations.clear();
    record.best.reset();
    record.closed_at.reset();
    if (record.created_at == 0) record.created_at = now_us();
    fs::create_directories(dir);
    write_meta(record);
    experiments_[record.id] = record;
    return record;
}

ExperimentRecord StateRoot::load_experiment(const std::string& id) const {
    std::lock_guard lock(mu_);
    if (auto it = experiments_.find(id); it != experiments_.end()) return it->second;
    if (id.empty() || id.find('/') != std::string::npos || id.find("..") != std::string::npos) {
        throw Error(ErrorKind::not_found, "experiment '" + id + "' not found");
    }
    ExperimentRecord r = read_from_disk(id);
    experiments_[id] = r;
    return r;
}

ExperimentRecord StateRoot::record_observation(const std::string& id, const optimizer::Observation& obs) {
    std::lock_guard lock(mu_);
    auto it = experiments_.find(id);
    if (it == experiments_.end()) {
        if (!fs::exists(experiments_dir() / id / kMeta)) throw Error(ErrorKind::not_found, "experiment '" + id + "' not found");
        it = experiments_.emplace(id, read_from_disk(id)).first;
    }
    ExperimentRecord& r = it->second;
    if (is_terminal(r.state)) {
        throw Error(ErrorKind::conflict, "experiment '" + id + "' is " + std::string(to_string(r.state)));
    }
    if (!obs.well_formed()) throw Error(ErrorKind::invalid_argument, "observation needs exactly one of value or failed");
    for (const auto& existing : r.observations) {
        if (existing.suggestion_id == obs.suggestion_id) {
            throw Error(ErrorKind::conflict, "duplicate observation for suggestion '" + obs.suggestion_id + "'");
        }
    }
    append_durably(experiments_dir() / id / kObservations, dump_line(to_json(obs)));
    r.observations.push_back(obs);
    if (obs.succeeded() && (!r.best || *obs.value > r.best->value)) r.best = optimizer::BestSeen{obs.assignment, *obs.value};
    if (r.observations.size() >= r.observation_budget) {
        r.state = ExperimentState::completed;
        r.closed_at = now_us();
        write_meta(r);
    }
    return r;
}

ExperimentRecord StateRoot::close_experiment(const std::string& id, ExperimentState terminal) {
    if (!is_terminal(terminal)) throw Error(ErrorKind::illegal_transition, "cannot reopen an experiment");
    std::lock_guard lock(mu_);
    auto it = experiments_.find(id);
    if (it == experiments_.end()) it = experiments_.emplace(id, read_from_disk(id)).first;
    ExperimentRecord& r = it->second;
    if (r.state == terminal) return r;
    if (is_terminal(r.state)) {
        throw Error(ErrorKind::illegal_transition, "experiment '" + id + "' is already " + std::string(to_string(r.state)));
    }
    r.state = terminal;
    r.closed_at = now_us();
    write_meta(r);
    return r;
}

PurgeReport StateRoot::purge_cluster_artifacts(const std::string& cluster) {
    if (cluster.empty() || !fs::is_directory(cluster_dir(cluster))) {
        throw Error(ErrorKind::not_found, "cluster '" + cluster + "' not found");
    }
    PurgeReport report;
    {
        std::lock_guard lock(mu_);
        const fs::path logs = cluster_logs_dir(cluster);
        for (auto it = open_logs_.begin(); it != open_logs_.end();) {
            if (it->first.string().rfind(logs.string(), 0) == 0) it = open_logs_.erase(it);
            else ++it;
        }
        std::error_code ec;
        if (fs::exists(logs)) {
            for (const auto& entry : fs::recursive_directory_iterator(logs, ec)) {
                if (!entry.is_regular_file()) continue;
                std::ifstream in(entry.path(), std::ios::binary);
                report.logs_deleted += static_cast<std::size_t>(
                    std::count(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>(), '\n'));
            }
            fs::remove_all(logs, ec);
        }
    }
    for (const auto& id : experiment_ids()) {
        ExperimentRecord r = load_experiment(id);
        if (r.cluster_name != cluster) continue;
        ++report.experiments_retained;
        if (r.state == ExperimentState::active) close_experiment(id, ExperimentState::deleted);
    }
    return report;
}

fs::path StateRoot::log_path(const std::string& cluster, const LogRecord& r) const {
    return cluster_logs_dir(cluster) / r.experiment_id / (r.run_id + "." + std::string(to_string(r.stream)));
}

void StateRoot::append_log(const std::string& cluster, const LogRecord& record) {
    const fs::path p = log_path(cluster, record);
    std::lock_guard lock(mu_);
    auto it = open_logs_.find(p);
    if (it == open_logs_.end()) {
        fs::create_directories(p.parent_path());
        it = open_logs_.emplace(p, std::ofstream(p, std::ios::app | std::ios::binary)).first;
    }
    it->second << dump_line(to_json(record));
    it->second.flush();
}

void StateRoot::close_run_logs(const std::string& cluster, const std::string& experiment_id, const std::string& run_id) {
    std::lock_guard lock(mu_);
    for (auto stream : {LogStream::stdout_stream, LogStream::stderr_stream}) {
        LogRecord key;
        key.experiment_id = experiment_id;
        key.run_id = run_id;
        key.stream = stream;
        open_logs_.erase(log_path(cluster, key));
    }
}

std::vector<LogRecord> StateRoot::read_logs(const std::string& cluster, const std::string& experiment_id) const {
    std::vector<LogRecord> out;
    const fs::path dir = cluster_logs_dir(cluster) / experiment_id;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        std::ifstream in(entry.path(), std::ios::binary);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            try {
                out.push_back(log_record_from_json(json::parse(line)));
            } catch (const std::exception&) {
                break;  // torn tail
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const LogRecord& a, const LogRecord& b) {
        if (a.cursor != b.cursor) return a.cursor < b.cursor;
        return std::tie(a.timestamp, a.run_id, a.stream, a.seq) < std::tie(b.timestamp, b.run_id, b.stream, b.seq);
    });
    return out;
}

bool StateRoot::logs_available(const std::string& cluster) const { return has_cluster(cluster); }

}  // namespace orchestrate::store
