#pragma once

#include <stdexcept>
#include <string>

namespace mrsi {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments (CLI exit code 1).
class ConfigError : public Error
{
public:
    using Error::Error;
};

/// Malformed or inconsistent data (CLI exit code 2).
class DataError : public Error
{
public:
    using Error::Error;
};

class OutOfRangeError : public DataError
{
public:
    using DataError::DataError;
};

class AxisMismatchError : public DataError
{
public:
    using DataError::DataError;
};

/// Binary file format problems. `kind()` tells them apart.
class FormatError : public DataError
{
public:
    enum class Kind { BadMagic, VersionMismatch, Truncated, DimensionOverflow, ShapeMismatch, Io };

    FormatError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Decomposition failure, non-finite loss and the like (CLI exit code 3).
class NumericError : public Error
{
public:
    using Error::Error;
};

} // namespace mrsi
