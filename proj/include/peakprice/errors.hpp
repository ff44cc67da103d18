#pragma once

#include <stdexcept>
#include <string>

namespace peakprice {

/// Dimension mismatch or malformed argument (negative rates, bad probabilities, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The instance violates p^D > T * max_t p^t and a closed form was requested.
class AssumptionViolated : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A capped allocation cannot meet the requirement (caller should raise the cap).
class Infeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The epsilon handed to a constructive routine is too large for the construction.
class InfeasibleEpsilon : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A check that should be unreachable fired. Always a bug.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Scenario or profile file could not be parsed.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace peakprice
