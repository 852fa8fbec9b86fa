#pragma once

#include <stdexcept>
#include <string>

namespace resfed {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Vector/matrix dimensions do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid or inconsistent configuration value.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input file (IDX, config, snapshot).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Wire message failed framing or consistency checks.
class CorruptDataError : public Error {
public:
    using Error::Error;
};

/// Operation needs a non-empty dataset.
class EmptyDataError : public Error {
public:
    using Error::Error;
};

/// Codec input has nothing to encode.
class EmptyPayloadError : public Error {
public:
    using Error::Error;
};

/// Trajectory does not hold enough history for the predictor window.
class InsufficientHistoryError : public Error {
public:
    using Error::Error;
};

/// Protocol state machine called out of order (e.g. missing warm-up).
class ProtocolOrderError : public Error {
public:
    using Error::Error;
};

} // namespace resfed
