#ifndef GPCHECK_ERROR_HPP
#define GPCHECK_ERROR_HPP

#include <stdexcept>
#include <string>

namespace gpcheck {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input: ordering of radii, negative profiles, bad config values.
class ParameterError : public Error {
public:
    using Error::Error;
};

// A requested configuration the implementation cannot handle (too large, unsupported N or d).
class CapabilityError : public Error {
public:
    using Error::Error;
};

// Shapes of states/fields/grids that do not match.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Arguments outside the domain of an operation (negative times, empty grids, R/N >= N^-beta).
class DomainError : public Error {
public:
    using Error::Error;
};

// The discretisation cannot decide a sign: a pivot or eigenvalue sits within round-off of zero.
class NumericalDegeneracy : public Error {
public:
    NumericalDegeneracy(const std::string& what, double spacing)
        : Error(what), spacing_(spacing) {}
    double spacing() const noexcept { return spacing_; }

private:
    double spacing_;
};

class IntegrationFailure : public Error {
public:
    using Error::Error;
};

class RootNotFound : public Error {
public:
    RootNotFound(const std::string& what, double s_lo, double s_hi)
        : Error(what), s_lo_(s_lo), s_hi_(s_hi) {}
    double s_lo() const noexcept { return s_lo_; }
    double s_hi() const noexcept { return s_hi_; }

private:
    double s_lo_, s_hi_;
};

class StepTooLarge : public Error {
public:
    using Error::Error;
};

class KrylovError : public Error {
public:
    KrylovError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

// Eigenfunction reaches the artificial wall: the radial box is too small.
class DomainSizeError : public Error {
public:
    DomainSizeError(const std::string& what, double boundary_mass)
        : Error(what), boundary_mass_(boundary_mass) {}
    double boundary_mass() const noexcept { return boundary_mass_; }

private:
    double boundary_mass_;
};

} // namespace gpcheck

#endif
