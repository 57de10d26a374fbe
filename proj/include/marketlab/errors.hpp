#pragma once

#include <stdexcept>
#include <string>

namespace marketlab {

struct NonNormalizableError : std::runtime_error {
    explicit NonNormalizableError(const std::string& what) : std::runtime_error(what) {}
};

struct SingularAtZeroError : std::runtime_error {
    explicit SingularAtZeroError(const std::string& what) : std::runtime_error(what) {}
};

struct SupportMismatchError : std::runtime_error {
    explicit SupportMismatchError(const std::string& what) : std::runtime_error(what) {}
};

struct GridTooCoarseError : std::runtime_error {
    explicit GridTooCoarseError(const std::string& what) : std::runtime_error(what) {}
};

struct InadmissibleConstraintsError : std::runtime_error {
    explicit InadmissibleConstraintsError(const std::string& what) : std::runtime_error(what) {}
};

struct NoGopError : std::runtime_error {
    NoGopError(const std::string& what, double residual_)
        : std::runtime_error(what), residual(residual_) {}
    double residual;
};

struct SingularTransformError : std::runtime_error {
    explicit SingularTransformError(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateSampleError : std::runtime_error {
    explicit DegenerateSampleError(const std::string& what) : std::runtime_error(what) {}
};

struct NonEquilibriumError : std::runtime_error {
    explicit NonEquilibriumError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace marketlab
