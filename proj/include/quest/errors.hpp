#pragma once

#include <stdexcept>
#include <string>

namespace quest {

// Bad or inconsistent configuration (unknown tokenizer, unknown strategy, ...).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Input outside an operation's mathematical domain.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Malformed or inconsistent data (duplicate ids, dangling references).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Predictor subprocess misbehaved.
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class LookupError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

} // namespace quest
