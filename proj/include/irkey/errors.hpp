#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace irkey {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DomainError : public Error { public: using Error::Error; };
class SingularProjection : public Error { public: using Error::Error; };
class OutOfRange : public Error { public: using Error::Error; };
class SegmentTooShort : public Error { public: using Error::Error; };
class RankDeficient : public Error { public: using Error::Error; };
class InsufficientTraining : public Error { public: using Error::Error; };
class EmptyPath : public Error { public: using Error::Error; };
class EmptyDictionary : public Error { public: using Error::Error; };
class LengthMismatch : public Error { public: using Error::Error; };
class SchemaError : public Error { public: using Error::Error; };
class NonMonotoneTimestamps : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Wraps an error raised inside one pipeline stage.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace irkey
