#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace raresim {

/// Input rejected by a validator. Carries the offending field, the line it came
/// from (0 when the input is not line-oriented) and the violated constraint so
/// that callers can emit a machine-readable diagnostic.
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string field, std::string constraint, std::size_t line = 0)
        : std::runtime_error(format(field, constraint, line)),
          field_(std::move(field)),
          constraint_(std::move(constraint)),
          line_(line) {}

    const std::string& field() const noexcept { return field_; }
    const std::string& constraint() const noexcept { return constraint_; }
    std::size_t line() const noexcept { return line_; }

private:
    static std::string format(const std::string& field, const std::string& constraint,
                              std::size_t line) {
        std::string msg = field + ": " + constraint;
        if (line != 0) msg += " (line " + std::to_string(line) + ")";
        return msg;
    }

    std::string field_;
    std::string constraint_;
    std::size_t line_;
};

/// Caller broke an operation precondition (non-adjacent pair, unknown id, ...).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace raresim
