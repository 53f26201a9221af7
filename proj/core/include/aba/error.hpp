#pragma once

#include <stdexcept>
#include <string>

namespace aba {

// Base for every error raised by the library. `kind()` is a stable
// machine-readable tag used by the CLI when emitting error JSON.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

struct DomainError : Error {
    explicit DomainError(const std::string& w) : Error("domain", w) {}
};

struct ParseError : Error {
    ParseError(const std::string& w, std::size_t line)
        : Error("parse", "line " + std::to_string(line) + ": " + w), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct GeometryError : Error {
    explicit GeometryError(const std::string& w) : Error("geometry", w) {}
};

struct ReconstructionError : Error {
    explicit ReconstructionError(const std::string& w) : Error("reconstruction", w) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error("config", w) {}
};

struct FitError : Error {
    explicit FitError(const std::string& w) : Error("fit", w) {}
};

struct PredictionError : Error {
    explicit PredictionError(const std::string& w) : Error("prediction", w) {}
};

struct EstimationError : Error {
    explicit EstimationError(const std::string& w) : Error("estimation", w) {}
};

struct SimulationError : Error {
    explicit SimulationError(const std::string& w) : Error("simulation", w) {}
};

}  // namespace aba
