#pragma once

#include <stdexcept>
#include <string>

namespace atomshadow {

/// Base class for everything this library throws.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad caller input: mismatched dimensions, out-of-domain parameters,
/// degenerate data. Maps to CLI exit code 2.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// File reading/writing problems; message carries the path. Exit code 2.
class IoError : public Error {
public:
    using Error::Error;
};

/// The cloud could not be segmented (no usable Gaussian cross-section).
/// Callers should skip enhancement for this shot. Exit code 4.
class SegmentationError : public Error {
public:
    using Error::Error;
};

/// Parameter solving failed (e.g. gray-transform knee geometry). Exit code 2.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// An internal invariant was broken; indicates a bug. Exit code 3.
class InternalError : public Error {
public:
    using Error::Error;
};

} // namespace atomshadow
