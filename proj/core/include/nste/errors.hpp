#pragma once

#include <stdexcept>
#include <string>

namespace nste {

class DimensionMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a homography is singular or maps the output plane to infinity.
class DegenerateTransform : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class VariantMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace nste
