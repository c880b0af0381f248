#pragma once

#include <stdexcept>
#include <string>

namespace linkmix {

// Base of every error raised by the library. `is_validation()` separates
// bad input (CLI exit code 2) from numeric failures (exit code 3).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual bool is_validation() const noexcept { return true; }
};

class InvalidParameter : public Error { using Error::Error; };
class InvalidMap : public Error { using Error::Error; };
class InvalidGenotype : public Error { using Error::Error; };
class StructuralError : public Error { using Error::Error; };
class InvalidInput : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class InvalidComparison : public Error { using Error::Error; };
class RefuseToRun : public Error { using Error::Error; };

class ParseError : public Error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class NumericError : public Error {
public:
    using Error::Error;
    bool is_validation() const noexcept override { return false; }
};

} // namespace linkmix
