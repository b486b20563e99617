#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace stablesem {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed model description (names, indicator map, prior knowledge).
class SpecError : public Error {
public:
    using Error::Error;
};

/// Malformed or incomplete input data.
class InputError : public Error {
public:
    explicit InputError(const std::string& what, std::vector<std::size_t> rows = {})
        : Error(what), rows_(std::move(rows)) {}

    /// Zero-based data row indices that triggered the error, when applicable.
    [[nodiscard]] const std::vector<std::size_t>& rows() const noexcept { return rows_; }

private:
    std::vector<std::size_t> rows_;
};

/// Structural model whose (I - B) is singular.
class DegenerateModelError : public Error {
public:
    using Error::Error;
};

/// Matrix argument outside the domain of the fit function (not positive definite).
class NumericDomainError : public Error {
public:
    using Error::Error;
};

/// Column without usable variation (constant, or a single observed category).
class DegenerateColumnError : public Error {
public:
    using Error::Error;
};

/// (Theta + Lambda Lambda') not invertible.
class DegenerateMeasurementError : public Error {
public:
    using Error::Error;
};

/// One-dimensional likelihood search failed; carries the last iterate.
class EstimationError : public Error {
public:
    EstimationError(const std::string& what, double last_iterate)
        : Error(what), last_iterate_(last_iterate) {}

    [[nodiscard]] double last_iterate() const noexcept { return last_iterate_; }

private:
    double last_iterate_;
};

/// Pooled effect multiset was empty.
class NoEstimateError : public Error {
public:
    using Error::Error;
};

/// Too few subsets of a search completed.
class PartialRunError : public Error {
public:
    using Error::Error;
};

} // namespace stablesem
