#pragma once

#include <stdexcept>
#include <string>

namespace flowbone {

/// Malformed or inconsistent input data (CLI exit code 2).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Precondition on a numerical routine violated (CLI exit code 3).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Requested node id does not exist.
class LookupError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// SGD produced a non-finite value.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RenderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem failure (CLI exit code 4).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace flowbone
