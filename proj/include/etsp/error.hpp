#pragma once

#include <stdexcept>
#include <string>

namespace etsp {

// Input violated an operation's precondition (degenerate separator, odd
// boundary, instance too large for an oracle, ...).
struct PreconditionError : std::invalid_argument {
  explicit PreconditionError(const std::string& what) : std::invalid_argument(what) {}
};

// Malformed instance file or command-line value.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// The solver ran past SolverConfig::time_limit_ms.
struct TimeLimitError : std::runtime_error {
  explicit TimeLimitError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace etsp
