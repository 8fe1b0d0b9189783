#pragma once

#include <Eigen/Core>

namespace scstory {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Working precision of the engine. Interchange files are 32-bit.
using Matrix = MatrixX<double>;
using RowVector = RowVectorX<double>;

}  // namespace scstory
