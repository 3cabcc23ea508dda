#pragma once

#include <Eigen/Core>

#include <vector>

namespace detectrack {

// Minimum-cost perfect matching on a square cost matrix (Hungarian method with
// potentials, O(n^3)). Returns column index per row.
std::vector<int> hungarian_square(const Eigen::MatrixXd& cost);

// Rectangular problem: pads with dummy rows/columns of cost `pad_cost` and
// returns the column per real row, or -1 when the row was left unmatched.
std::vector<int> hungarian_min_cost(const Eigen::MatrixXd& cost, double pad_cost);

}  // namespace detectrack
