#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace drb {

/// Malformed network text. Carries the 1-based line number of the offending line.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A structurally well-formed input that violates a domain invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Illegal state transition, e.g. both mirrored spaces marked modified.
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// An element collapsed to (near) zero current length during a solve.
class SingularElementError : public std::runtime_error {
public:
    SingularElementError(std::size_t element, const std::string& what)
        : std::runtime_error(what), element_(element) {}

    std::size_t element() const noexcept { return element_; }

private:
    std::size_t element_;
};

/// Execution resources requested beyond the configured cap.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

} // namespace drb
