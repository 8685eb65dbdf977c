#pragma once

#include <Eigen/Dense>

namespace wproj {

// Row-major so that one atom (one sample) is a contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kSimplexTol = 1e-9;

}  // namespace wproj
