#pragma once

// Finite-difference verification of every trainable parameter block: the
// graph network and its affinity head on a 3-track / 2-detection graph, both
// calibration heads, and the camera and BEV aggregation conv stacks.

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace detectrack {

struct GradCheckEntry {
  std::string block;
  Eigen::Index size = 0;
  double max_rel_error = 0;
};

std::vector<GradCheckEntry> run_gradcheck_suite(std::uint64_t seed = 1, double eps = 1e-5);

}  // namespace detectrack
