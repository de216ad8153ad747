#pragma once

#include <stdexcept>
#include <string>

namespace vgpds {

// Bad input: parameter domain, shape mismatch, malformed files.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Factorization failure or a non-finite objective.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace vgpds
