#pragma once

#include <cstdint>
#include <random>
#include <utility>

#include <Eigen/Dense>

namespace stablesem {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Seeded generator used throughout; every stochastic operation takes one by reference.
using Rng = std::mt19937_64;

/// Directed pair (from, to) over dense node indices.
using Edge = std::pair<int, int>;

} // namespace stablesem
