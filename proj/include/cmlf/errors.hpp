// Exception hierarchy shared by all cmlf components.
#pragma once

#include <stdexcept>
#include <string>

namespace cmlf {

/// Violated precondition or invariant of an in-process contract
/// (dimension mismatch, non-finite input, unpaired samples, ...).
struct ContractError : std::logic_error {
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

/// Invalid or inconsistent configuration (empty property sets, horizon
/// too short for the phase schedule, ...).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Dataset / checkpoint / report file problems; the message names the
/// missing or malformed field.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cmlf
