#pragma once

#include <stdexcept>
#include <string>

namespace kvflow {

// Invalid experiment or workload configuration. `field` names the offending
// key (dotted path) when one is known.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& message)
        : std::invalid_argument(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const { return field_; }

private:
    std::string field_;
};

// Unrecoverable simulation state: a policy bug or a request that can never fit.
class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace kvflow
