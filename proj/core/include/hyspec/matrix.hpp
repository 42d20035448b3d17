#pragma once

#include <Eigen/Core>

namespace hyspec {

// Samples in rows, features in columns.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace hyspec
