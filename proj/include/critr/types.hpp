#pragma once

#include <Eigen/Core>

namespace critr {

using Vector = Eigen::VectorXd;
// Design matrices are row-major so that per-cluster row blocks are contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace critr
