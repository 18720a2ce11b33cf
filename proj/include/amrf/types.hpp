#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace amrf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

}  // namespace amrf
