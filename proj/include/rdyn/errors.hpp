#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rdyn {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A vector or matrix argument has the wrong dimension.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A computation left the domain of valid floating-point values
/// (division by zero, log of a non-positive number, non-finite result, ...).
/// Carries enough context to locate the failure: which regime, which
/// state component and, when raised inside a simulation, which timestep.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what,
                            long regime = -1,
                            long component = -1,
                            long timestep = -1)
        : Error(what), regime_(regime), component_(component), timestep_(timestep) {}

    /// Regime index the failure occurred in, or -1 if not applicable.
    long regime() const noexcept { return regime_; }
    /// State component index, or -1 if not applicable.
    long component() const noexcept { return component_; }
    /// Timestep of the enclosing simulation, or -1 outside simulations.
    long timestep() const noexcept { return timestep_; }

private:
    long regime_;
    long component_;
    long timestep_;
};

/// An explicit switching word ran out before the requested horizon.
class SignalExhausted : public Error {
public:
    using Error::Error;
};

/// An operation that needs a non-empty regime word received an empty one.
class EmptyWordError : public Error {
public:
    using Error::Error;
};

/// A fixed-point solve detected that no isolated fixed point exists
/// (singular I - A for an affine map, or a singular Newton system).
class NoUniqueFixedPoint : public Error {
public:
    using Error::Error;
};

/// An expression references a state component outside [0, dimension).
class IndexError : public Error {
public:
    using Error::Error;
};

/// A textual expression failed to parse.  Carries the byte offset of the
/// offending token so callers can point at the exact position.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Every sample point of a structural diagnostic failed to evaluate.
class SamplingError : public Error {
public:
    using Error::Error;
};

/// A scenario file is malformed: schema violation, dangling regime label,
/// dimension mismatch, or an invalid parameter value.
class ScenarioError : public Error {
public:
    using Error::Error;
};

} // namespace rdyn
