#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace paai {

/// Base class for data-dependent failures (bad files, divergence, ...).
/// Contract violations on arguments throw std::invalid_argument instead.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A delimited input file could not be parsed. `line()` is 1-based and
/// counts the header row.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), m_line(line) {}

    std::size_t line() const noexcept { return m_line; }

private:
    std::size_t m_line;
};

/// A NaN or infinity showed up in a forward or backward pass.
class NonFiniteError : public Error {
public:
    explicit NonFiniteError(std::string node)
        : Error("non-finite value at node '" + node + "'"), m_node(std::move(node)) {}

    const std::string& node() const noexcept { return m_node; }

private:
    std::string m_node;
};

namespace detail {

inline void require(bool condition, const char* message) {
    if (!condition) {
        throw std::invalid_argument(message);
    }
}

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw std::invalid_argument(message);
    }
}

}  // namespace detail

}  // namespace paai
