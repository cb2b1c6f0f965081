#pragma once

#include <stdexcept>
#include <string>

namespace coipss {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad input data: schema violations, dangling references, invalid parameters.
/// CLI maps these to exit code 1.
class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error(what) {}
};

/// Structurally inconsistent network (dangling endpoints, islanding, ...).
class StructuralError : public InputError {
public:
    explicit StructuralError(const std::string& what) : InputError(what) {}
};

/// Numerical failure: divergence, singular systems, algebraic-solve failure.
/// CLI maps these to exit code 2.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(what) {}
};

/// Iterative method failed to converge; carries the final residual.
class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, double final_residual, int iterations)
        : NumericalError(what),
          final_residual(final_residual),
          iterations(iterations) {}

    double final_residual;
    int iterations;
};

}  // namespace coipss
