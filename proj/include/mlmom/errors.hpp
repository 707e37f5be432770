#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mlmom {

/// Base for every library error. `exit_code` is what the CLI maps it to.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 3; }
};

struct DomainError : Error {
    using Error::Error;
};

struct OverflowError : Error {
    double threshold;
    OverflowError(const std::string& what, double thr) : Error(what), threshold(thr) {}
};

struct DivergenceError : Error {
    using Error::Error;
};

struct ToleranceError : Error {
    double achieved;
    ToleranceError(const std::string& what, double err) : Error(what), achieved(err) {}
};

struct MissingMomentError : Error {
    std::vector<double> orders;
    MissingMomentError(const std::string& what, std::vector<double> missing)
        : Error(what), orders(std::move(missing)) {}
};

struct DtTooLargeError : Error {
    double majorant;
    DtTooLargeError(const std::string& what, double m) : Error(what), majorant(m) {}
};

struct BudgetError : Error {
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

struct FitDegenerateError : Error {
    using Error::Error;
};

struct UsageError : Error {
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

}  // namespace mlmom
