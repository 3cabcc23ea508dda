#pragma once

// Named views onto trainable storage. Models expose their parameters as a
// ParamList; a gradient object of the same model type exposes an identically
// laid out list, which is what lets optimizers, finite-difference checks and
// the weight file treat every model uniformly.

#include <Eigen/Core>

#include <string>
#include <vector>

namespace detectrack {

struct ParamBlock {
  std::string name;
  std::vector<Eigen::Index> shape;
  double* data = nullptr;
  Eigen::Index size = 0;
};

using ParamList = std::vector<ParamBlock>;

inline ParamBlock make_block(std::string name, Eigen::MatrixXd& m) {
  return {std::move(name), {m.rows(), m.cols()}, m.data(), m.size()};
}

inline ParamBlock make_block(std::string name, Eigen::VectorXd& v) {
  return {std::move(name), {v.size()}, v.data(), v.size()};
}

inline ParamBlock make_block(std::string name, double& s) {
  return {std::move(name), {}, &s, 1};
}

Eigen::Index total_size(const ParamList& params);
Eigen::VectorXd flatten(const ParamList& params);
void assign(const ParamList& params, const Eigen::VectorXd& values);
void set_zero(const ParamList& params);

}  // namespace detectrack
