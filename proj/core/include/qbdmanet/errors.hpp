#pragma once

#include <stdexcept>
#include <string>

namespace qbdmanet {

/// A network parameter is outside its admissible range.
class ParamError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A configuration document could not be parsed or is incomplete.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The requested arrival rate cannot be served by the queue in question.
class StabilityError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A linear-algebra step failed or produced an inconsistent result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace qbdmanet
