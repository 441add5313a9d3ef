#pragma once

#include <stdexcept>
#include <string>

namespace purify {

/// Input outside the mathematical domain of an operation (L > 1/2, alpha <= 0, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A derivative was requested at a point where it genuinely diverges.
class SingularPointError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class RootNotBracketedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class QuadratureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed run configuration (grid shape, step counts, ranges).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace purify
