#pragma once

#include <stdexcept>
#include <string>

namespace hardy {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside the domain of the operation (x = y on the diagonal, r <= 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Adaptive integration ran out of subdivisions; carries what it reached.
class QuadratureError : public Error {
public:
    QuadratureError(const std::string& what, double estimate, double achieved_error)
        : Error(what), estimate_(estimate), achieved_error_(achieved_error) {}
    double estimate() const { return estimate_; }
    double achieved_error() const { return achieved_error_; }

private:
    double estimate_;
    double achieved_error_;
};

// The two excision radii of a principal value disagree beyond tolerance.
class PrincipalValueError : public Error {
public:
    PrincipalValueError(const std::string& what, double discrepancy)
        : Error(what), discrepancy_(discrepancy) {}
    double discrepancy() const { return discrepancy_; }

private:
    double discrepancy_;
};

class HypothesisViolation : public Error {
public:
    using Error::Error;
};

class CertificationFailure : public Error {
public:
    using Error::Error;
};

// |R~g(x0)| fell below its certified lower bound.
class DegenerateDenominator : public Error {
public:
    using Error::Error;
};

class DivergenceDetected : public Error {
public:
    DivergenceDetected(const std::string& what, double ratio) : Error(what), ratio_(ratio) {}
    double ratio() const { return ratio_; }

private:
    double ratio_;
};

}  // namespace hardy
