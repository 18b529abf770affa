#pragma once

#include <stdexcept>
#include <string>

namespace subriem {

/// Failure categories surfaced by the library. The CLI maps them to exit codes.
enum class ErrorKind {
  Input,               // malformed or dimension-mismatched arguments
  Domain,              // argument outside the operation's domain (t <= 0, stencil off-range)
  Precondition,        // e.g. covector is not conjugate
  IntegrationFailure,  // step-size underflow or non-finite state
  SingularJacobian,    // Newton hit a singular differential of exp
  NoConvergence,
  BranchLost,
  Unresolved,
  Inconclusive,
  NotFound,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class IntegrationFailure : public Error {
 public:
  IntegrationFailure(const std::string& what, double last_valid_time);
  double last_valid_time() const noexcept { return last_valid_time_; }

 private:
  double last_valid_time_;
};

/// Raised by estimate_order when the two estimators disagree.
class InconclusiveOrder : public Error {
 public:
  InconclusiveOrder(int slope_candidate, int derivative_candidate);
  int slope_candidate() const noexcept { return slope_candidate_; }
  int derivative_candidate() const noexcept { return derivative_candidate_; }

 private:
  int slope_candidate_;
  int derivative_candidate_;
};

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) throw Error(kind, what);
}

}  // namespace subriem
