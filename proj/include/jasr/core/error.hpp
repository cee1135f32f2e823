#pragma once

#include <stdexcept>
#include <string>

namespace jasr {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input document (annotation, manifest, config, archive).
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    explicit ParseError(const std::string& what) : ParseError(what, 0) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_ = 0;
};

/// Invalid configuration or violated precondition on a parameter set.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Tensor or image dimensions that do not fit the operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::string last_good_checkpoint)
        : Error(what), checkpoint_(std::move(last_good_checkpoint)) {}

    const std::string& last_good_checkpoint() const noexcept { return checkpoint_; }

private:
    std::string checkpoint_;
};

#define JASR_CHECK(cond, ErrorType, msg)        \
    do {                                        \
        if (!(cond)) throw ErrorType(msg);      \
    } while (0)

}  // namespace jasr
