#pragma once

#include <stdexcept>
#include <string>

namespace horolab {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Failures that signal a numerical problem (as opposed to bad input).
/// The CLI maps these to exit code 3.
class NumericalFailure : public Error {
public:
    using Error::Error;
};

/// A point sits within tolerance of a disk boundary; the caller should perturb.
class AmbiguousBoundary : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

/// Domain reduction did not terminate (invalid Schottky data).
class NonTerminating : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

/// The two critical-exponent estimators disagree; the word cutoff is too small.
class InsufficientDepth : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

/// A conditional measure has no mass in the requested window.
class EmptySupport : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

/// Too much box mass escaped plaque assignment or sits on the box boundary.
class LeakyBox : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

class ZeroDenominator : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

/// Invalid group data, hopf coordinates with equal endpoints, bad test functions.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Bad experiment configuration. The CLI maps these to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace horolab
