#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace knotflow {

// Raised when two quadrature images of the curve (nearly) coincide, i.e. the
// discrete curve has run into itself.
class NonEmbedded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SolveFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateCurve : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnknownPreset : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A flow run aborted at `step()`; the message carries the underlying cause.
class FlowError : public std::runtime_error {
public:
    FlowError(long step, const std::string &what)
        : std::runtime_error("step " + std::to_string(step) + ": " + what), m_step(step) {}
    long step() const { return m_step; }

private:
    long m_step;
};

} // namespace knotflow
