#include "compresslab/errors.hpp"

namespace compresslab {

ConfigError::ConfigError(std::string field, const std::string& message)
    : Error("config error in '" + field + "': " + message), field_(std::move(field)) {}

DatasetError::DatasetError(std::size_t line, const std::string& message)
    : Error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}

NoJsonFound::NoJsonFound() : Error("no balanced JSON object found in text") {}

MalformedJson::MalformedJson(std::size_t offset, const std::string& detail)
    : Error("malformed JSON at offset " + std::to_string(offset) + ": " + detail), offset_(offset) {}

FatalRequestError::FatalRequestError(int status, std::string body)
    : Error("request failed with HTTP " + std::to_string(status) + ": " + body),
      status_(status),
      body_(std::move(body)) {}

namespace {
std::string join_attempts(const std::vector<std::string>& attempts) {
    std::string out = "retries exhausted after " + std::to_string(attempts.size()) + " attempts";
    for (std::size_t k = 0; k < attempts.size(); ++k) {
        out += "\n  attempt " + std::to_string(k + 1) + ": " + attempts[k];
    }
    return out;
}
}  // namespace

RetriesExhausted::RetriesExhausted(std::vector<std::string> attempt_errors)
    : Error(join_attempts(attempt_errors)), attempts_(std::move(attempt_errors)) {}

}  // namespace compresslab
