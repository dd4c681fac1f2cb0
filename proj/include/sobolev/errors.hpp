#pragma once

#include <stdexcept>
#include <string>

namespace sobo {

/// Input violates a documented precondition (shape, range, finiteness).
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// File could not be read or written; the message names the path.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// t reached the clamp where 1/(1-t) is no longer evaluated.
class SingularityError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// A state or loss became non-finite during an iterative procedure.
class DivergenceError : public std::runtime_error {
public:
  DivergenceError(const std::string& what, long step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  long step() const noexcept { return step_; }

private:
  long step_;
};

/// Backward pass requested against parameters that changed after forward.
class StaleCacheError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

} // namespace sobo
