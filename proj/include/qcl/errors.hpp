#pragma once

#include <stdexcept>
#include <string>

namespace qcl {

/// Malformed or out-of-domain input (bad weights, non-finite states, bad schedule).
class InputError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A caller broke an operation's precondition, e.g. a selection outside Kq.
class ContractError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// Requested operation is not defined for the given configuration.
class UnsupportedError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The sliding resolver found no admissible hold set.
class NoSlidingSelection : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Explicit integration of the regularized system blew up.
class NumericalInstability : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace qcl
