#pragma once

#include <stdexcept>
#include <string>

namespace pnewton {

// Base of every error raised by the library. The harness maps
// solver-side failures to exit code 1 and input/usage failures to 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical / solver failures.
class NotPositiveDefinite : public Error { using Error::Error; };
class NotPSD : public Error { using Error::Error; };
class ConvergenceFailure : public Error { using Error::Error; };
class RangeViolation : public Error { using Error::Error; };
class LineSearchStall : public Error { using Error::Error; };
class DenominatorVanished : public Error { using Error::Error; };
class MaxIters : public Error { using Error::Error; };
class ZeroHessian : public Error { using Error::Error; };
class MissingOptimum : public Error { using Error::Error; };

// Input failures.
class InvalidArgument : public Error { using Error::Error; };
class BadShape : public InvalidArgument { using InvalidArgument::InvalidArgument; };
class BadLabel : public InvalidArgument { using InvalidArgument::InvalidArgument; };
class EmptyDataset : public InvalidArgument { using InvalidArgument::InvalidArgument; };

class ParseError : public InvalidArgument {
 public:
  ParseError(const std::string& what, long line)
      : InvalidArgument(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  long line() const noexcept { return line_; }

 private:
  long line_;
};

}  // namespace pnewton
