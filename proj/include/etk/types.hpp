#pragma once

#include <Eigen/Dense>

namespace etk {

using Scalar = double;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Read-only parameter type that binds to vectors and vector expressions
// without copying.
using VecRef = Eigen::Ref<const Eigen::VectorXd>;
using MatRef = Eigen::Ref<const Eigen::MatrixXd>;

}  // namespace etk
