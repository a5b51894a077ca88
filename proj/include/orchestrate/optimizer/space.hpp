#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace orchestrate::optimizer {

enum class ParameterKind { real, integer, categorical };
enum class Scale { linear, log };

/// A parameter value: double, int or categorical label.
using ParamValue = std::variant<double, std::int64_t, std::string>;

/// Parameter name -> value. Covers exactly the names of its space.
using Assignment = std::map<std::string, ParamValue>;

struct ParameterDef {
    std::string name;
    ParameterKind kind = ParameterKind::real;
    double min = 0.0;                 // real / integer only
    double max = 0.0;
    Scale scale = Scale::linear;      // real only
    std::vector<std::string> values;  // categorical only
    std::optional<int> grid_count;
};

/// Ordered, validated list of parameter definitions. Only produced by
/// validate_space() or parse_space().
class ParameterSpace {
public:
    ParameterSpace() = default;

    const std::vector<ParameterDef>& params() const noexcept { return params_; }
    const ParameterDef* find(const std::string& name) const;
    std::size_t size() const noexcept { return params_.size(); }

    /// True when every value of `a` lies within its parameter's domain and
    /// `a` names exactly this space's parameters.
    bool contains(const Assignment& a) const;

private:
    friend ParameterSpace validate_space(std::vector<ParameterDef> defs);
    std::vector<ParameterDef> params_;
};

/// Normalizes and checks the definitions. Throws Error(invalid_argument) with
/// field path "parameters[i].<field>" on duplicate names, min >= max,
/// log scale with min <= 0, non-integral int bounds, empty categoricals.
ParameterSpace validate_space(std::vector<ParameterDef> defs);

/// Parses the `parameters` block of an experiment config (a JSON array).
ParameterSpace parse_space(const nlohmann::json& j, const std::string& path = "parameters");

std::string_view to_string(ParameterKind kind);
std::string_view to_string(Scale scale);

nlohmann::json to_json(const ParameterSpace& space);
nlohmann::json assignment_to_json(const Assignment& a);
/// Parses an assignment, using `space` (when given) to decide int vs double.
Assignment assignment_from_json(const nlohmann::json& j, const ParameterSpace* space = nullptr);

/// "x=0.4 opt=adam"
std::string format_assignment(const Assignment& a);
std::string format_value(const ParamValue& v);

}  // namespace orchestrate::optimizer
