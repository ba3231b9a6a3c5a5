#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace smurf {

/// Malformed user input: bad model specification, data, or configuration.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A model specification that failed validation. Carries every issue found,
/// not just the first one.
class SpecError : public InputError {
 public:
  explicit SpecError(std::vector<std::string> issues);

  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  std::vector<std::string> issues_;
};

/// Numerical failure that cannot be recovered from (non-finite objective,
/// singular system without regularization, ...).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace smurf
