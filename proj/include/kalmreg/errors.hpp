#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kalmreg {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message) : std::runtime_error(message) {}
};

/// Malformed or unreadable CSV input. Row/column are 1-based, 0 when not applicable.
class CsvError : public Error {
public:
    explicit CsvError(const std::string& message, std::size_t row = 0, std::size_t column = 0)
        : Error(message), row_(row), column_(column) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

/// Invalid experiment configuration: schema violations, bad ranges, unknown keys.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite weight, bias, or loss.
class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& message, std::size_t epoch = 0,
                             std::size_t sample = 0)
        : Error(message), epoch_(epoch), sample_(sample) {}

    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t sample() const noexcept { return sample_; }

private:
    std::size_t epoch_;
    std::size_t sample_;
};

/// Singular or numerically ill-conditioned linear system.
class SingularityError : public Error {
public:
    using Error::Error;
};

} // namespace kalmreg
