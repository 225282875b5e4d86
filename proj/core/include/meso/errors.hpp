#pragma once

#include <stdexcept>
#include <string>

namespace meso {

/// Bad input: malformed box, window, spec or config field. Maps to CLI exit 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Geometric precondition violated (empty box, sub-box not contained, ...).
class DomainError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// A partition tree cannot be refined further without producing cells of
/// fewer than two sites.
class DepthExhaustedError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Numerical failure (factorization breakdown, ill-conditioned solve).
/// Maps to CLI exit 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FactorizationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ConditioningError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace meso
