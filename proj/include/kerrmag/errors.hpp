#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kerrmag {

/// Input outside the mathematical domain of an operation (e.g. zero volume, c = 0).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Caller violated a precondition that is not a physics domain issue
/// (empty grids, mismatched traces, a "root" that is not a root).
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Iterative method failed to produce a usable answer.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. `line()` is 1-based; 0 means the whole file.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
          line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace kerrmag

namespace kerrmag {

/// File-system failure (unreadable input, unwritable output).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace kerrmag
