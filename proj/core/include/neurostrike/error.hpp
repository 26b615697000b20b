#pragma once

#include <stdexcept>
#include <string>

namespace neurostrike {

/// Base class for every failure that originates in the model rather than in
/// the caller's command line. Carries the module and offending parameter so
/// the CLI can print a precise message.
class Error : public std::runtime_error {
public:
    Error(std::string module, std::string parameter, const std::string& what)
        : std::runtime_error(module + ": " + parameter + ": " + what),
          module_(std::move(module)),
          parameter_(std::move(parameter)) {}

    const std::string& module() const noexcept { return module_; }
    const std::string& parameter() const noexcept { return parameter_; }

private:
    std::string module_;
    std::string parameter_;
};

/// A value lies outside the range an operation accepts.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Tensor or weight shapes disagree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// The maze exit cannot be reached from the start.
class UnreachableError : public Error {
public:
    using Error::Error;
};

/// Q-learning did not meet its stop criterion within the epoch budget.
class TrainingFailed : public Error {
public:
    using Error::Error;
};

/// Neuron state became non-finite during integration.
class DivergenceError : public Error {
public:
    DivergenceError(int neuron, double time_ms, const std::string& what)
        : Error("snn", "neuron " + std::to_string(neuron) + " at t=" + std::to_string(time_ms) + " ms", what),
          neuron_(neuron),
          time_ms_(time_ms) {}

    int neuron() const noexcept { return neuron_; }
    double time_ms() const noexcept { return time_ms_; }

private:
    int neuron_;
    double time_ms_;
};

/// A correlation or statistic has no variance to work with.
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// File could not be read, written or parsed.
class IoError : public Error {
public:
    IoError(const std::string& path, const std::string& what) : Error("io", path, what) {}
};

}  // namespace neurostrike
