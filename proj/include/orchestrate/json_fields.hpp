#pragma once

// Field-path aware accessors for validating JSON documents (experiment and
// cluster configs arrive as YAML converted to JSON, or as HTTP bodies).

#include <string>

#include <nlohmann/json.hpp>

#include "orchestrate/error.hpp"

namespace orchestrate::json_fields {

inline std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline std::string index(const std::string& path, std::size_t i) {
    return path + "[" + std::to_string(i) + "]";
}

[[noreturn]] inline void fail(const std::string& path, const std::string& message) {
    throw Error(ErrorKind::invalid_argument, message, path);
}

inline const nlohmann::json& require(const nlohmann::json& obj, const std::string& key,
                                     const std::string& path) {
    if (!obj.is_object()) fail(path, "expected a mapping");
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) fail(join(path, key), "required field missing");
    return *it;
}

inline const nlohmann::json* optional(const nlohmann::json& obj, const std::string& key) {
    if (!obj.is_object()) return nullptr;
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return nullptr;
    return &*it;
}

inline std::string as_string(const nlohmann::json& v, const std::string& path) {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
}

inline double as_number(const nlohmann::json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
}

inline long long as_integer(const nlohmann::json& v, const std::string& path) {
    if (v.is_number_integer()) return v.get<long long>();
    if (v.is_number_float()) {
        double d = v.get<double>();
        if (d == static_cast<double>(static_cast<long long>(d))) return static_cast<long long>(d);
    }
    fail(path, "expected an integer");
}

inline bool as_bool(const nlohmann::json& v, const std::string& path) {
    if (!v.is_boolean()) fail(path, "expected true or false");
    return v.get<bool>();
}

}  // namespace orchestrate::json_fields
