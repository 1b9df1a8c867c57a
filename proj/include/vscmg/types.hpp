#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace vscmg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using CVecX = Eigen::VectorXcd;
using CMatX = Eigen::MatrixXcd;
using Complex = std::complex<double>;

// Error hierarchy. Every failure the library reports derives from vscmg::Error
// so callers can catch one type at the boundary.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain (e.g. reduced quaternion with |q| > 1).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A spin axis collapsed to (near) zero length.
class DegenerateAxis : public Error {
public:
    using Error::Error;
};

class UncontrollableError : public Error {
public:
    using Error::Error;
};

class PlacementFailure : public Error {
public:
    using Error::Error;
};

class SingularBasis : public Error {
public:
    using Error::Error;
};

/// Non-finite state encountered while integrating.
class DivergenceError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

}  // namespace vscmg
