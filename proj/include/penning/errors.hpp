#pragma once

#include <stdexcept>
#include <string>

namespace penning {

// Bad inputs: malformed configs, out-of-range parameters, inconsistent
// requests.  CLI maps these to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// Failures of the numerics themselves: non-convergence, saddle points,
// degenerate geometry, refused fits.  CLI maps these to exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Drive frequency too close to a normal mode for a perturbative coupling
// matrix to mean anything.
class ResonanceError : public ValidationError {
public:
    explicit ResonanceError(const std::string& what) : ValidationError(what) {}
};

} // namespace penning
