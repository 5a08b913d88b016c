#pragma once

#include <stdexcept>
#include <string>

namespace jumpstab {

// Base for every error raised by the library. The CLI maps these onto exit
// codes: ParseError / DimensionError / IoError -> 2, numeric failures -> 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

// Raised when an input matrix has the wrong shape. `field()` names the
// offending entry, e.g. "A[0]" or "weights.D[1]".
class DimensionError : public Error {
public:
    DimensionError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class NonConvergence : public Error {
public:
    NonConvergence(const std::string& what, double last_residual)
        : Error(what), last_residual_(last_residual) {}
    double last_residual() const noexcept { return last_residual_; }

private:
    double last_residual_;
};

class IndefiniteIterate : public Error {
public:
    using Error::Error;
};

class SingularOperator : public Error {
public:
    SingularOperator(const std::string& what, int order) : Error(what), order_(order) {}
    int order() const noexcept { return order_; }

private:
    int order_;
};

// State left the finite / bounded region during integration.
class DivergenceError : public Error {
public:
    DivergenceError(double time, long path = -1)
        : Error(message(time, path)), time_(time), path_(path) {}
    double time() const noexcept { return time_; }
    long path() const noexcept { return path_; }

private:
    static std::string message(double time, long path) {
        std::string s = "state diverged at t = " + std::to_string(time);
        if (path >= 0) s += " (path " + std::to_string(path) + ")";
        return s;
    }
    double time_;
    long path_;
};

}  // namespace jumpstab
