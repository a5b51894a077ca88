#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace orchestrate {

enum class ErrorKind {
    invalid_argument,   // validation failure, field path in field()
    not_found,
    conflict,           // duplicate name, already running, ...
    quota_exceeded,
    unschedulable,
    illegal_transition,
    unavailable,        // e.g. logs purged with the cluster
    internal,
};

std::string_view to_string(ErrorKind kind);
/// Inverse of to_string; unknown names map to internal.
ErrorKind error_kind_from_string(std::string_view name);

/// Error carrying a machine-readable kind and, for validation errors, the
/// dotted path of the offending config field (e.g. "parameters[1].bounds.min").
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, std::string field = {})
        : std::runtime_error(field.empty() ? message : field + ": " + message),
          kind_(kind), field_(std::move(field)), bare_(message) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& field() const noexcept { return field_; }
    const std::string& bare_message() const noexcept { return bare_; }

    /// True for errors the user can fix (CLI exit code 1).
    bool is_user_error() const noexcept { return kind_ != ErrorKind::internal; }

private:
    ErrorKind kind_;
    std::string field_;
    std::string bare_;
};

}  // namespace orchestrate
