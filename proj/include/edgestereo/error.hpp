#pragma once

#include <stdexcept>
#include <string>

namespace edgestereo {

/// Operand shapes do not satisfy an operation's preconditions.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical computation produced or received non-finite / undefined values.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem access failed.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value or combination.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class FormatErrorKind {
    MalformedHeader,
    TruncatedPayload,
    ZeroScale,
    UnsupportedPixelFormat,
    CorruptData,
};

const char* to_string(FormatErrorKind kind) noexcept;

/// Malformed bytes handed to one of the file-format readers.
class FormatError : public std::runtime_error {
public:
    FormatError(FormatErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    FormatErrorKind kind() const noexcept { return kind_; }

private:
    FormatErrorKind kind_;
};

} // namespace edgestereo
