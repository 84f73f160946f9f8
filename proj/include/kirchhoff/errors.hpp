#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace kirchhoff {

/// Invalid user input: grid, model, perturbation or solver settings.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
    ConfigError(const std::string& field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(field) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// A Field was combined with a grid of a different size.
class DimensionError : public std::invalid_argument {
public:
    DimensionError(std::size_t expected, std::size_t actual)
        : std::invalid_argument("field length " + std::to_string(actual) +
                                " does not match grid size " + std::to_string(expected)) {}
};

/// Breakdown inside a linear solve (non-finite or vanishing pivot).
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, std::size_t row)
        : std::runtime_error(what + " at row " + std::to_string(row)), row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

/// Operation not available for the given model (e.g. Pohozaev residual with a
/// tabulated potential, dilation oracle with non-constant V).
class UnsupportedError : public std::logic_error {
public:
    explicit UnsupportedError(const std::string& what) : std::logic_error(what) {}
};

/// A solver pipeline could not produce a result (initializer, deformation,
/// continuation or oracle failure). `kind` is a short machine-readable tag.
class SolverError : public std::runtime_error {
public:
    SolverError(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

} // namespace kirchhoff
