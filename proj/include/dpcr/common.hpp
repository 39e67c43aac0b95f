#pragma once

#include <stdexcept>
#include <string>

namespace dpcr {

inline constexpr double kPi = 3.14159265358979323846;

// Raised when a query and dataset disagree on the domain.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Raised on malformed streams (deletion of an absent item, bad timestamps).
struct InvalidStreamError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when adaptive parallel composition sees overlapping declarations.
// Signals a bug in the calling mechanism, not bad input data.
struct DisjointnessViolation : std::logic_error {
  using std::logic_error::logic_error;
};

// Raised when ledger bookkeeping does not add up (series overrun etc.).
struct AccountingError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace dpcr
