#pragma once

#include <stdexcept>
#include <string>

namespace qmdp {

enum class ErrorKind {
  Input,          // caller passed something outside the operation's domain
  Build,          // finite-model construction failed a consistency check
  Numeric,        // non-finite value or singular system
  Convergence,    // iterative method did not reach its tolerance
  Precondition,   // analytic hypotheses of a bound are violated
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::Input, what);
}

}  // namespace qmdp
