#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bagreg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad shape, non-finite value, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent input data (dataset files, model files, manifests).
class DataError : public Error {
public:
    using Error::Error;
    DataError(const std::string& what, std::size_t line);

    /// 1-based line number, or 0 when the error is not tied to a line.
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_ = 0;
};

/// Factorization failure, divergence, non-finite objective values.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Raised by the optimizers when a gradient entry is NaN or infinite.
class NonFiniteGradient : public NumericalError {
public:
    explicit NonFiniteGradient(std::ptrdiff_t index);
    std::ptrdiff_t index() const noexcept { return index_; }

private:
    std::ptrdiff_t index_;
};

}  // namespace bagreg
