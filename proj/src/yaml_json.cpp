#include "orchestrate/yaml_json.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "orchestrate/error.hpp"

namespace orchestrate {

using nlohmann::json;

namespace {

json scalar_to_json(const YAML::Node& node) {
    const std::string& text = node.Scalar();
    if (node.Tag() == "!") return text;  // quoted
    if (text == "null" || text == "~" || text.empty()) return nullptr;
    if (text == "true" || text == "True") return true;
    if (text == "false" || text == "False") return false;
    try {
        std::size_t pos = 0;
        long long v = std::stoll(text, &pos);
        if (pos == text.size()) return v;
    } catch (const std::exception&) {
    }
    try {
        std::size_t pos = 0;
        double v = std::stod(text, &pos);
        if (pos == text.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    return text;
}

json to_json(const YAML::Node& node) {
    switch (node.Type()) {
        case YAML::NodeType::Null:
        case YAML::NodeType::Undefined:
            return nullptr;
        case YAML::NodeType::Scalar:
            return scalar_to_json(node);
        case YAML::NodeType::Sequence: {
            json out = json::array();
            for (const auto& item : node) out.push_back(to_json(item));
            return out;
        }
        case YAML::NodeType::Map: {
            json out = json::object();
            for (const auto& kv : node) out[kv.first.as<std::string>()] = to_json(kv.second);
            return out;
        }
    }
    return nullptr;
}

}  // namespace

json parse_yaml(const std::string& text) {
    try {
        return to_json(YAML::Load(text));
    } catch (const YAML::Exception& e) {
        throw Error(ErrorKind::invalid_argument, std::string("malformed YAML: ") + e.what());
    }
}

json load_yaml_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::invalid_argument, "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_yaml(ss.str());
    } catch (const Error& e) {
        throw Error(ErrorKind::invalid_argument, path.string() + ": " + e.bare_message());
    }
}

}  // namespace orchestrate
