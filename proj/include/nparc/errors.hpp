#pragma once

#include <stdexcept>
#include <string>

namespace nparc {

/// Base class for every error raised by the library. `code()` is a stable,
/// machine-parsable identifier used by the CLI.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

class InvalidInput : public Error {
public:
    explicit InvalidInput(const std::string& what) : Error("INVALID_INPUT", what) {}
};

class InvalidConfig : public Error {
public:
    explicit InvalidConfig(const std::string& what) : Error("INVALID_CONFIG", what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error("DATA_ERROR", what) {}
};

/// Exact transport was asked for more atoms than the oracle supports.
class CapacityError : public Error {
public:
    explicit CapacityError(const std::string& what) : Error("CAPACITY", what) {}
};

/// Kernel matrix could not be factorized with the requested jitter.
class ConditioningError : public Error {
public:
    ConditioningError(const std::string& what, double suggested_jitter)
        : Error("ILL_CONDITIONED", what), suggested_jitter_(suggested_jitter) {}
    double suggested_jitter() const noexcept { return suggested_jitter_; }

private:
    double suggested_jitter_;
};

class IncompleteArtifacts : public Error {
public:
    explicit IncompleteArtifacts(const std::string& what) : Error("INCOMPLETE_ARTIFACTS", what) {}
};

/// Raised by the backward recursion when too many design points fail to converge.
class NonConvergenceAbort : public Error {
public:
    explicit NonConvergenceAbort(const std::string& what) : Error("NON_CONVERGENCE", what) {}
};

}  // namespace nparc
