/** @file errors.hpp
 *  @brief Exception hierarchy shared by the library and the CLI.
 *
 *  The CLI maps these onto process exit codes: ConfigError -> 2,
 *  SolverError -> 3, InvariantViolation -> 4 (the latter only under --strict).
 */
#pragma once

#include <stdexcept>
#include <string>

namespace fpsi {

/// Bad user input: malformed config, invalid parameter combination,
/// inadmissible initial data, unknown keys.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A linear solve failed (non-convergence, singular block, non-finite values).
class SolverError : public std::runtime_error {
public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

/// A runtime state or scheme invariant was violated (strict-mode fatal).
class InvariantViolation : public std::runtime_error {
public:
  explicit InvariantViolation(const std::string& what) : std::runtime_error(what) {}
};

} // namespace fpsi
