#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace compresslab {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration. `field` names the offending key.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message);
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// A dataset file failed schema validation. `line` is 1-based; 0 when the
/// error is not tied to a single line.
class DatasetError : public Error {
public:
    DatasetError(std::size_t line, const std::string& message);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class NoJsonFound : public Error {
public:
    NoJsonFound();
};

class MalformedJson : public Error {
public:
    MalformedJson(std::size_t offset, const std::string& detail);
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Transport-level failure (timeout, connection reset, HTTP 5xx/429).
class RetryableError : public Error {
public:
    using Error::Error;
};

/// HTTP 4xx or any other failure that retrying cannot fix.
class FatalRequestError : public Error {
public:
    FatalRequestError(int status, std::string body);
    int status() const noexcept { return status_; }
    const std::string& body() const noexcept { return body_; }

private:
    int status_;
    std::string body_;
};

class RetriesExhausted : public Error {
public:
    explicit RetriesExhausted(std::vector<std::string> attempt_errors);
    const std::vector<std::string>& attempt_errors() const noexcept { return attempts_; }

private:
    std::vector<std::string> attempts_;
};

class UnsupportedCapability : public Error {
public:
    using Error::Error;
};

class ContextOverflow : public Error {
public:
    using Error::Error;
};

/// Judge or predictor output could not be interpreted.
class EvaluationError : public Error {
public:
    using Error::Error;
};

}  // namespace compresslab
