#pragma once

#include <stdexcept>
#include <string>

namespace madvm {

// Malformed or out-of-range user input (bad files, configs, arguments).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// The exact oracle refuses instances whose joint state space is too large.
class BudgetExceeded : public InputError {
public:
    using InputError::InputError;
};

// A migration plan that breaks the per-slot migration cap.
class ConstraintError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Internal consistency failure; surfaces bugs, never user mistakes.
class InvariantViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace madvm
