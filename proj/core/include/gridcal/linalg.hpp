// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

namespace gridcal {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Load-composition parameters, one mixture fraction per parameterized load.
using Parameters = Eigen::VectorXd;

}  // namespace gridcal
