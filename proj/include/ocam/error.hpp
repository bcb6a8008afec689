#pragma once

#include <stdexcept>

namespace ocam {

// Caller mistakes: bad arguments, malformed input files, violated
// preconditions. Mapped to exit code 2 by the CLI.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numeric failures discovered while computing: undefined distances,
// non-finite losses. Mapped to exit code 3 by the CLI.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace ocam
