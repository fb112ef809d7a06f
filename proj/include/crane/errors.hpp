#pragma once

#include <stdexcept>
#include <string>

namespace crane {

// Base class for all errors raised by this library.
struct CraneError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A joint left its admissible range (carries the offending joint index, 0-based).
struct LimitViolation : CraneError {
    LimitViolation(int joint_index_, const std::string& what_)
        : CraneError(what_), joint_index(joint_index_) {}
    int joint_index;
};

// Bad function argument (non-finite input, out-of-domain parameter, ...).
struct InvalidArgument : CraneError {
    using CraneError::CraneError;
};

// Malformed or inconsistent configuration (unknown key, bad value, empty region).
struct ConfigError : CraneError {
    using CraneError::CraneError;
};

// API misuse, e.g. stepping a terminated environment without reset.
struct ProtocolError : CraneError {
    using CraneError::CraneError;
};

// Non-finite values appeared where finite math was required (training aborts).
struct NumericalFailure : CraneError {
    using CraneError::CraneError;
};

// Filesystem / serialization problems (unreadable checkpoint, version mismatch).
struct IoError : CraneError {
    using CraneError::CraneError;
};

}  // namespace crane
