#pragma once

#include <stdexcept>
#include <string>

namespace scmo {

/// Base class for every error raised by the library. `kind()` is a stable,
/// machine-readable tag used by the CLI error line.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    [[nodiscard]] const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

/// Non-SPD covariance, singular innovation covariance and similar.
struct NumericalDomainError : Error {
    explicit NumericalDomainError(const std::string& what) : Error("numerical-domain", what) {}
};

struct DimensionError : Error {
    explicit DimensionError(const std::string& what) : Error("dimension", what) {}
};

/// A filter was handed a model it was not derived for (e.g. non-Poisson
/// clutter in the PHD filter).
struct ModelMismatchError : Error {
    explicit ModelMismatchError(const std::string& what) : Error("model-mismatch", what) {}
};

struct DegenerateParameterError : Error {
    explicit DegenerateParameterError(const std::string& what) : Error("degenerate-parameter", what) {}
};

/// Zero or non-finite normaliser in a multi-object update or likelihood.
struct DegenerateLikelihoodError : Error {
    explicit DegenerateLikelihoodError(const std::string& what) : Error("degenerate-likelihood", what) {}
};

/// Every parent particle received zero weight.
struct DegenerateFilterError : Error {
    explicit DegenerateFilterError(const std::string& what) : Error("degenerate-filter", what) {}
};

struct CapacityError : Error {
    explicit CapacityError(const std::string& what) : Error("capacity", what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error("io", what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error("config", what) {}
};

} // namespace scmo
