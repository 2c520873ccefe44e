#pragma once

#include <stdexcept>

namespace catreg {

/// A distribution or model parameter is outside its valid domain
/// (nonpositive scale, mismatched dimension, bad weights).
class invalid_parameter : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A probability vector cannot be normalized because it carries no mass.
class degenerate_distribution : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Requested data or schedule cannot be satisfied by the inputs.
class insufficient_data : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace catreg
