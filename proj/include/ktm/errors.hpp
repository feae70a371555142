#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ktm {

/// Base of every error the library throws. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
    DimensionError(const std::string &what, std::size_t lhs, std::size_t rhs)
        : Error(what + " (" + std::to_string(lhs) + " vs " +
                std::to_string(rhs) + ")") {}
};

/// Violated type invariant (non-finite value, color out of range, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

class ZeroFeatureError : public Error {
public:
    explicit ZeroFeatureError(std::size_t index)
        : Error("feature vector at index " + std::to_string(index) +
                " has zero norm"),
          index_(index) {}
    std::size_t index() const { return index_; }

private:
    std::size_t index_;
};

class EmptyCloudError : public Error {
public:
    using Error::Error;
};

class InsufficientPointsError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    IndexError(const std::string &what, std::size_t entry)
        : Error(what), entry_(entry) {}
    /// Position of the offending entry in the caller's list.
    std::size_t entry() const { return entry_; }

private:
    std::size_t entry_;
};

class DuplicateAnnotationError : public Error {
public:
    DuplicateAnnotationError(const std::string &what, std::size_t entry)
        : Error(what), entry_(entry) {}
    std::size_t entry() const { return entry_; }

private:
    std::size_t entry_;
};

class DegenerateGeometryError : public Error {
public:
    using Error::Error;
};

class DegenerateTemplateError : public Error {
public:
    using Error::Error;
};

class InsufficientCandidatesError : public Error {
public:
    using Error::Error;
};

class NoConsensusError : public Error {
public:
    using Error::Error;
};

class SpecError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    ConfigError(const std::string &what, std::size_t line)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}
    /// 1-based; 0 when the error is not tied to a line.
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// File-format errors carry the byte offset (binary) or JSON path (text)
/// where parsing stopped.
class FormatError : public Error {
public:
    FormatError(const std::string &what, std::uint64_t offset)
        : Error(what + " at byte offset " + std::to_string(offset)),
          offset_(offset) {}
    FormatError(const std::string &what, const std::string &json_path)
        : Error(what + " at " + (json_path.empty() ? "/" : json_path)),
          json_path_(json_path.empty() ? "/" : json_path) {}
    std::uint64_t offset() const { return offset_; }
    const std::string &json_path() const { return json_path_; }

private:
    std::uint64_t offset_ = 0;
    std::string json_path_;
};

class BadMagicError : public FormatError {
public:
    using FormatError::FormatError;
};

class VersionUnsupportedError : public FormatError {
public:
    using FormatError::FormatError;
};

class TruncatedPayloadError : public FormatError {
public:
    using FormatError::FormatError;
};

class NonFiniteValueError : public FormatError {
public:
    using FormatError::FormatError;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace ktm
