#pragma once

#include <Eigen/Dense>

namespace ffo {

// rows = samples; row-major so each sample is contiguous
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CRMat = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CVec = Eigen::VectorXcd;

}  // namespace ffo
