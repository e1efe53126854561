#pragma once

#include <stdexcept>
#include <string>

namespace ergo {

/// Two boxes (or a box and an image) refer to different pixel coordinate spaces.
struct SpaceMismatchError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Image dimensions are not multiples of the patch size where they must be.
struct AlignmentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A box that should have been validated is degenerate or out of bounds.
struct InvalidRegionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct MissingGroundTruthError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Image bytes could not be decoded (unsupported or corrupt file).
struct DecodeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Base for all model-backend failures.
struct BackendError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Transport-level failure that persisted through all retries.
struct BackendUnavailableError : BackendError {
    using BackendError::BackendError;
};

/// The endpoint answered, but not with a usable completion (non-2xx or bad body).
struct WireProtocolError : BackendError {
    int status = 0;
    WireProtocolError(int status_, const std::string& what_)
        : BackendError(what_), status(status_) {}
};

/// A scripted backend had no entry for the requested key. Test failure signal.
struct ScriptedMissError : BackendError {
    using BackendError::BackendError;
};

struct GroupSizeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DatasetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace ergo
