#pragma once

#include <Eigen/Dense>

namespace sgm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
// Sample matrices are n x d with one sample per row.
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace sgm
