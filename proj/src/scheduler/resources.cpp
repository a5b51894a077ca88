#include "orchestrate/scheduler/resources.hpp"

#include "orchestrate/json_fields.hpp"

namespace orchestrate::scheduler {

namespace jf = json_fields;

ResourceRequest parse_resources(const nlohmann::json& j, const std::string& path) {
    ResourceRequest r;
    if (j.is_null()) return r;
    if (!j.is_object()) jf::fail(path, "expected a mapping");
    if (const auto* g = jf::optional(j, "gpus")) r.gpus = static_cast<int>(jf::as_integer(*g, jf::join(path, "gpus")));
    if (const auto* c = jf::optional(j, "cpus")) r.cpus = static_cast<int>(jf::as_integer(*c, jf::join(path, "cpus")));
    if (r.gpus < 0) jf::fail(jf::join(path, "gpus"), "must be non-negative");
    if (r.gpus > kMaxGpusPerRun) {
        throw Error(ErrorKind::unschedulable,
                    "requested " + std::to_string(r.gpus) + " GPUs per run; exceeds largest supported node (" +
                        std::to_string(kMaxGpusPerRun) + " GPUs)",
                    jf::join(path, "gpus"));
    }
    if (r.cpus < 1) jf::fail(jf::join(path, "cpus"), "must be at least 1");
    return r;
}

nlohmann::json to_json(const ResourceRequest& r) { return {{"gpus", r.gpus}, {"cpus", r.cpus}}; }

}  // namespace orchestrate::scheduler
