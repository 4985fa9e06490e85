#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace volcal {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

// Invalid user-facing input: parameters, configuration, flags.
class ValidationError : public Error {
public:
    using Error::Error;
};

class NotPositiveDefinite : public Error {
public:
    using Error::Error;
};

class NoConvergence : public Error {
public:
    using Error::Error;
};

// Option price outside the no-arbitrage band, or not resolvable to an implied
// volatility inside the supported bracket.
class PriceOutOfBounds : public Error {
public:
    using Error::Error;
};

class NonFiniteError : public Error {
public:
    using Error::Error;
};

// A value outside its admissible box; `coordinate` is the offending column.
class OutOfBoundsError : public Error {
public:
    OutOfBoundsError(const std::string& what, std::size_t coordinate)
        : Error(what), coordinate_(coordinate) {}
    std::size_t coordinate() const noexcept { return coordinate_; }

private:
    std::size_t coordinate_;
};

class BudgetExhausted : public Error {
public:
    using Error::Error;
};

// Dataset CSV parse failure. `line` is 1-based.
class FormatError : public Error {
public:
    enum class Kind { malformed_header, row_length, non_numeric };

    FormatError(Kind kind, std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), kind_(kind), line_(line) {}

    Kind kind() const noexcept { return kind_; }
    std::size_t line() const noexcept { return line_; }

private:
    Kind kind_;
    std::size_t line_;
};

class ModelFileError : public Error {
public:
    enum class Kind { version, checksum, truncated, malformed };

    ModelFileError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

}  // namespace volcal
