#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace pcac {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Operand shapes do not agree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A configuration or domain invariant is violated.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An iterative method failed to converge or a factorization broke down.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require_size(Eigen::Index actual, Eigen::Index expected, const char* what)
{
    if (actual != expected) {
        throw DimensionError(std::string(what) + ": expected length " + std::to_string(expected) +
                             ", got " + std::to_string(actual));
    }
}

inline void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* what)
{
    if (m.rows() != rows || m.cols() != cols) {
        throw DimensionError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                             std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()));
    }
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m)
{
    return m.allFinite();
}

// Cholesky success is the positive-definiteness test used throughout.
inline bool is_positive_definite(const Matrix& m)
{
    if (m.rows() != m.cols() || m.rows() == 0) {
        return false;
    }
    Eigen::LLT<Matrix> llt(m);
    return llt.info() == Eigen::Success;
}

} // namespace detail
} // namespace pcac
