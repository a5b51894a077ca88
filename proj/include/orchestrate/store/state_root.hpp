#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "orchestrate/store/records.hpp"

namespace orchestrate::store {

namespace fs = std::filesystem;

/// On-disk state of one orchestrate installation:
///
///   <root>/experiments/<id>/meta            experiment description + state
///   <root>/experiments/<id>/observations    append-only, one JSON per line
///   <root>/clusters/<name>/cluster.json     provider-owned cluster state
///   <root>/clusters/<name>/runs.jsonl       run transition journal
///   <root>/clusters/<name>/logs/<exp>/<run>.<stdout|stderr>
///
/// Experiment data lives outside every cluster directory, so destroying a
/// cluster removes its logs and nothing else.
///
/// Thread-safe. Within one process the instance caches experiment records;
/// a single controller process writes any given experiment.
class StateRoot {
public:
    /// Creates the directory skeleton if needed and loads every experiment.
    /// Throws Error(invalid_argument) if `path` is a regular file or not
    /// writable.
    explicit StateRoot(fs::path path);
    ~StateRoot();

    StateRoot(const StateRoot&) = delete;
    StateRoot& operator=(const StateRoot&) = delete;

    /// $ORCHESTRATE_HOME, else ~/.orchestrate.
    static fs::path default_path();

    const fs::path& path() const noexcept { return path_; }
    fs::path experiments_dir() const { return path_ / "experiments"; }
    fs::path clusters_dir() const { return path_ / "clusters"; }
    fs::path cluster_dir(const std::string& cluster) const { return clusters_dir() / cluster; }
    fs::path cluster_logs_dir(const std::string& cluster) const { return cluster_dir(cluster) / "logs"; }

    std::vector<std::string> cluster_names() const;
    bool has_cluster(const std::string& cluster) const;

    // --- experiments -------------------------------------------------------

    /// Sortable, short, unique: base36 millisecond timestamp + random suffix.
    std::string new_experiment_id() const;
    std::vector<std::string> experiment_ids() const;

    /// Persists a new, empty, active experiment. Throws conflict if the id
    /// exists.
    ExperimentRecord create_experiment(ExperimentRecord record);

    /// Throws not_found for unknown ids.
    ExperimentRecord load_experiment(const std::string& id) const;

    /// Appends durably (fsync) before returning. Completes the experiment
    /// when the budget is reached. Rejects terminal experiments, duplicate
    /// suggestion ids and malformed observations.
    ExperimentRecord record_observation(const std::string& id, const optimizer::Observation& obs);

    /// active -> completed | deleted. Closing an already-closed experiment
    /// with the same state is a no-op; any other transition is rejected.
    ExperimentRecord close_experiment(const std::string& id, ExperimentState terminal);

    /// Deletes every log stored under the cluster and marks its active
    /// experiments deleted. Observations are untouched.
    PurgeReport purge_cluster_artifacts(const std::string& cluster);

    // --- logs --------------------------------------------------------------

    void append_log(const std::string& cluster, const LogRecord& record);
    /// Flushes and closes the files of one run.
    void close_run_logs(const std::string& cluster, const std::string& experiment_id, const std::string& run_id);
    /// All stored records of an experiment, ordered by cursor.
    std::vector<LogRecord> read_logs(const std::string& cluster, const std::string& experiment_id) const;
    bool logs_available(const std::string& cluster) const;

    /// Writes `content` to `target` via a temp file, fsync and rename.
    static void write_atomically(const fs::path& target, const std::string& content);

private:
    ExperimentRecord read_from_disk(const std::string& id) const;
    void write_meta(const ExperimentRecord& r) const;
    fs::path log_path(const std::string& cluster, const LogRecord& r) const;

    fs::path path_;
    mutable std::mutex mu_;
    mutable std::map<std::string, ExperimentRecord> experiments_;
    std::map<fs::path, std::ofstream> open_logs_;
};

/// Reads an observations file, returning the longest prefix of complete,
/// parseable records (a torn trailing write is dropped).
std::vector<optimizer::Observation> read_observations(const fs::path& file, const optimizer::ParameterSpace* space);

}  // namespace orchestrate::store
