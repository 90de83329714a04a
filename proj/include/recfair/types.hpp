#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace recfair {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Array = Eigen::ArrayXd;
using Index = Eigen::Index;

using seed_t = std::uint64_t;

}  // namespace recfair
