#pragma once

#include "detectrack/numerics.hpp"
#include "detectrack/params.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace detectrack {

enum class Activation { kRelu, kSigmoid, kIdentity };

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
  Activation activation = Activation::kIdentity;
};

// Fully connected stack. Inputs are column-batched: an (in x n) matrix holds
// n samples.
class Mlp {
 public:
  struct Cache {
    std::vector<Eigen::MatrixXd> inputs;   // per layer input
    std::vector<Eigen::MatrixXd> outputs;  // per layer post-activation
  };

  Mlp() = default;
  // widths = {in, h1, ..., out}; one activation per layer.
  Mlp(const std::vector<int>& widths, const std::vector<Activation>& activations);

  static Mlp random(const std::vector<int>& widths,
                    const std::vector<Activation>& activations, Rng& rng);

  int input_width() const;
  int output_width() const;
  std::size_t depth() const { return layers_.size(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache& cache) const;

  // Accumulates parameter gradients into `grad` (an Mlp of identical shape)
  // and returns the gradient with respect to the input batch.
  Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& grad_out,
                           Mlp& grad) const;

  Mlp zeros_like() const;
  void append_params(ParamList& out, const std::string& prefix);

 private:
  std::vector<DenseLayer> layers_;
};

// Hidden layers use ReLU, the output layer a sigmoid.
Mlp make_score_head(int input_width, const std::vector<int>& hidden, Rng& rng);

}  // namespace detectrack
