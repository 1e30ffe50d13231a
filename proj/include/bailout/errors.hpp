#pragma once

#include <stdexcept>
#include <string>

namespace bailout {

// Numerical failures (bad parameters, unsolvable calibration, non-PSD input).
// The CLI maps these to exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DomainError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NoSolutionError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NotPositiveSemidefinite : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DimensionError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// Contract violations on MDP inputs.
class InvalidActionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class EpisodeOverError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Bad configuration or input files. Exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

}  // namespace bailout
