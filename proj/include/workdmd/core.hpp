#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace workdmd {

using Index = Eigen::Index;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using CMat = Mat<std::complex<Scalar>>;

template <typename Scalar>
using CVec = Vec<std::complex<Scalar>>;

using MatrixXd = Mat<double>;
using VectorXd = Vec<double>;

// Error hierarchy. Everything thrown by the library derives from Error.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, long row, long column)
        : Error(what), row_(row), column_(column) {}

    long row() const noexcept { return row_; }
    long column() const noexcept { return column_; }

private:
    long row_;
    long column_;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

/// C^-1 + U^T P U is too close to singular for a Sherman-Morrison step.
class SingularUpdate : public NumericalError {
public:
    SingularUpdate(const std::string& what, double rcond)
        : NumericalError(what), rcond_(rcond) {}
    double rcond() const noexcept { return rcond_; }

private:
    double rcond_;
};

/// The rank-2 update produced non-finite values; the operator must be rebuilt by batch.
class ReinitRequired : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Eigenvector matrix of the reduced operator is numerically singular.
class SingularBasis : public NumericalError {
public:
    SingularBasis(const std::string& what, double condition)
        : NumericalError(what), condition_(condition) {}
    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

namespace detail {

inline void require(bool condition, const std::string& message)
{
    if (!condition) {
        throw InvalidArgument(message);
    }
}

} // namespace detail

} // namespace workdmd
