#pragma once

#include <stdexcept>
#include <string>

namespace qnpv {

/// Argument outside the mathematical domain of an operation (r <= 0, tau < m^2, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Vector/matrix sizes that do not agree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// No sign change of kappa(r) could be bracketed.
class NoRootError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration value, unknown key or malformed input file.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A guaranteed property was violated. Always a bug.
class InternalError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace qnpv
