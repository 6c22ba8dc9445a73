#pragma once

#include <Eigen/Core>

namespace sms {

/// Row-major so that one sample (one soft label, one logit vector) is contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Task { Classification, Regression };

}  // namespace sms
