#include "orchestrate/optimizer/space.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "orchestrate/error.hpp"
#include "orchestrate/json_fields.hpp"

namespace orchestrate::optimizer {

namespace jf = json_fields;
using nlohmann::json;

std::string_view to_string(ParameterKind kind) {
    switch (kind) {
        case ParameterKind::real: return "double";
        case ParameterKind::integer: return "int";
        case ParameterKind::categorical: return "categorical";
    }
    return "?";
}

std::string_view to_string(Scale scale) {
    return scale == Scale::log ? "log" : "linear";
}

const ParameterDef* ParameterSpace::find(const std::string& name) const {
    for (const auto& p : params_) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

bool ParameterSpace::contains(const Assignment& a) const {
    if (a.size() != params_.size()) return false;
    for (const auto& p : params_) {
        auto it = a.find(p.name);
        if (it == a.end()) return false;
        const ParamValue& v = it->second;
        switch (p.kind) {
            case ParameterKind::real: {
                const double* d = std::get_if<double>(&v);
                if (!d || !std::isfinite(*d) || *d < p.min || *d > p.max) return false;
                break;
            }
            case ParameterKind::integer: {
                const auto* i = std::get_if<std::int64_t>(&v);
                if (!i || static_cast<double>(*i) < p.min || static_cast<double>(*i) > p.max) return false;
                break;
            }
            case ParameterKind::categorical: {
                const auto* s = std::get_if<std::string>(&v);
                if (!s) return false;
                bool found = false;
                for (const auto& option : p.values) found = found || option == *s;
                if (!found) return false;
                break;
            }
        }
    }
    return true;
}

ParameterSpace validate_space(std::vector<ParameterDef> defs) {
    if (defs.empty()) jf::fail("parameters", "at least one parameter is required");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < defs.size(); ++i) {
        auto& p = defs[i];
        const std::string path = jf::index("parameters", i);
        if (p.name.empty()) jf::fail(jf::join(path, "name"), "name must not be empty");
        if (!seen.insert(p.name).second) jf::fail(jf::join(path, "name"), "duplicate parameter name '" + p.name + "'");
        if (p.grid_count && *p.grid_count < 1) jf::fail(jf::join(path, "grid_count"), "grid_count must be positive");
        switch (p.kind) {
            case ParameterKind::real:
                if (!std::isfinite(p.min) || !std::isfinite(p.max)) jf::fail(jf::join(path, "bounds"), "bounds must be finite");
                if (!(p.min < p.max)) jf::fail(jf::join(path, "bounds"), "min must be < max");
                if (p.scale == Scale::log && p.min <= 0.0) jf::fail(jf::join(path, "scale"), "log scale requires min > 0");
                p.values.clear();
                break;
            case ParameterKind::integer:
                if (p.min != std::floor(p.min) || p.max != std::floor(p.max)) jf::fail(jf::join(path, "bounds"), "int bounds must be integral");
                if (!(p.min < p.max)) jf::fail(jf::join(path, "bounds"), "min must be < max");
                if (p.scale == Scale::log) jf::fail(jf::join(path, "scale"), "log scale is only supported for double parameters");
                p.values.clear();
                break;
            case ParameterKind::categorical: {
                if (p.values.empty()) jf::fail(jf::join(path, "values"), "categorical parameter needs at least one value");
                std::set<std::string> distinct(p.values.begin(), p.values.end());
                if (distinct.size() != p.values.size()) jf::fail(jf::join(path, "values"), "categorical values must be distinct");
                p.min = p.max = 0.0;
                p.scale = Scale::linear;
                break;
            }
        }
    }
    ParameterSpace space;
    space.params_ = std::move(defs);
    return space;
}

ParameterSpace parse_space(const json& j, const std::string& path) {
    if (!j.is_array()) jf::fail(path, "expected a list of parameter definitions");
    std::vector<ParameterDef> defs;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const json& item = j[i];
        const std::string p = jf::index(path, i);
        ParameterDef def;
        def.name = jf::as_string(jf::require(item, "name", p), jf::join(p, "name"));
        const std::string type = jf::as_string(jf::require(item, "type", p), jf::join(p, "type"));
        if (type == "double") def.kind = ParameterKind::real;
        else if (type == "int") def.kind = ParameterKind::integer;
        else if (type == "categorical") def.kind = ParameterKind::categorical;
        else jf::fail(jf::join(p, "type"), "unknown type '" + type + "' (expected double, int or categorical)");

        if (def.kind == ParameterKind::categorical) {
            const json& values = jf::require(item, "values", p);
            if (!values.is_array()) jf::fail(jf::join(p, "values"), "expected a list");
            for (std::size_t k = 0; k < values.size(); ++k) {
                const json& v = values[k];
                if (v.is_string()) def.values.push_back(v.get<std::string>());
                else if (v.is_number() || v.is_boolean()) def.values.push_back(v.dump());
                else jf::fail(jf::index(jf::join(p, "values"), k), "expected a scalar");
            }
        } else {
            const json& bounds = jf::require(item, "bounds", p);
            const std::string bp = jf::join(p, "bounds");
            def.min = jf::as_number(jf::require(bounds, "min", bp), jf::join(bp, "min"));
            def.max = jf::as_number(jf::require(bounds, "max", bp), jf::join(bp, "max"));
        }
        if (const json* scale = jf::optional(item, "scale")) {
            const std::string s = jf::as_string(*scale, jf::join(p, "scale"));
            if (s == "log") def.scale = Scale::log;
            else if (s == "linear") def.scale = Scale::linear;
            else jf::fail(jf::join(p, "scale"), "expected linear or log");
        }
        if (const json* count = jf::optional(item, "grid_count")) {
            def.grid_count = static_cast<int>(jf::as_integer(*count, jf::join(p, "grid_count")));
        }
        defs.push_back(std::move(def));
    }
    // Re-run validation, mapping its "parameters" prefix onto `path`.
    try {
        return validate_space(std::move(defs));
    } catch (const Error& e) {
        std::string field = e.field();
        if (path != "parameters" && field.rfind("parameters", 0) == 0) field = path + field.substr(10);
        throw Error(e.kind(), e.bare_message(), field);
    }
}

json to_json(const ParameterSpace& space) {
    json out = json::array();
    for (const auto& p : space.params()) {
        json item = {{"name", p.name}, {"type", std::string(to_string(p.kind))}};
        if (p.kind == ParameterKind::categorical) {
            item["values"] = p.values;
        } else {
            if (p.kind == ParameterKind::integer) {
                item["bounds"] = {{"min", static_cast<std::int64_t>(p.min)}, {"max", static_cast<std::int64_t>(p.max)}};
            } else {
                item["bounds"] = {{"min", p.min}, {"max", p.max}};
                item["scale"] = std::string(to_string(p.scale));
            }
        }
        if (p.grid_count) item["grid_count"] = *p.grid_count;
        out.push_back(std::move(item));
    }
    return out;
}

json assignment_to_json(const Assignment& a) {
    json out = json::object();
    for (const auto& [name, value] : a) {
        std::visit([&](const auto& v) { out[name] = v; }, value);
    }
    return out;
}

Assignment assignment_from_json(const json& j, const ParameterSpace* space) {
    if (!j.is_object()) throw Error(ErrorKind::invalid_argument, "assignment must be an object");
    Assignment a;
    for (const auto& [name, v] : j.items()) {
        const ParameterDef* def = space ? space->find(name) : nullptr;
        if (v.is_string()) {
            a[name] = v.get<std::string>();
        } else if (v.is_number_integer() && (!def || def->kind == ParameterKind::integer)) {
            a[name] = v.get<std::int64_t>();
        } else if (v.is_number()) {
            if (def && def->kind == ParameterKind::integer) a[name] = static_cast<std::int64_t>(std::llround(v.get<double>()));
            else a[name] = v.get<double>();
        } else {
            throw Error(ErrorKind::invalid_argument, "unsupported value for parameter '" + name + "'");
        }
    }
    return a;
}

std::string format_value(const ParamValue& v) {
    if (const auto* d = std::get_if<double>(&v)) {
        std::ostringstream os;
        os.precision(6);
        os << *d;
        return os.str();
    }
    if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
    return std::get<std::string>(v);
}

std::string format_assignment(const Assignment& a) {
    std::string out;
    for (const auto& [name, value] : a) {
        if (!out.empty()) out += ' ';
        out += name + "=" + format_value(value);
    }
    return out;
}

}  // namespace orchestrate::optimizer
