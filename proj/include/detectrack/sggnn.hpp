#pragma once

// Attention-gated message passing over the spatio-temporal graph and the
// pairwise affinity head.
//
// One iteration, synchronous over all nodes:
//   s_k  = cos(f_k, f_v)                 for active in-edges k -> v
//   a_k  = softmax_k(w * s_k)
//   f'_v = ReLU(W_self f_v + W_msg sum_k a_k f_k)
// Affinity between tracklet node i and detection node j:
//   A_ij = sigmoid(fc3(f'_i (*) f'_j)), (*) elementwise product by default.
// With `normalize` the final features are first standardized (zero mean and
// unit root mean square over their d entries), so the product sums to d times
// their Pearson correlation.

#include "detectrack/mlp.hpp"
#include "detectrack/stgraph.hpp"

#include <span>
#include <string>
#include <vector>

namespace detectrack {

enum class Combine { kProduct, kConcat };

struct GnnConfig {
  int iterations = 3;
  int dim = 64;
  bool tied = false;   // share one parameter set across iterations
  bool gating = true;  // false: uniform mean over in-edges, w unused
  bool normalize = true;
  // W_self starts at identity and W_msg near zero, each plus a tenth of the
  // default uniform draw; otherwise both use the default draw.
  bool identity_init = true;
  std::vector<int> head_hidden{64, 64};
  Combine combine = Combine::kProduct;
  double attention_init = 5.0;

  void validate() const;
};

struct GnnLayer {
  Eigen::MatrixXd w_self;
  Eigen::MatrixXd w_msg;
  double w_att = 0;
};

struct GnnParams {
  GnnConfig config;
  std::vector<GnnLayer> layers;  // one per iteration, or one when tied
  Mlp head;

  static GnnParams random(const GnnConfig& config, Rng& rng);
  GnnParams zeros_like() const;
  const GnnLayer& layer(int iteration) const { return layers[config.tied ? 0 : iteration]; }
  GnnLayer& layer(int iteration) { return layers[config.tied ? 0 : iteration]; }
  void append_params(ParamList& out, const std::string& prefix);
};

// Softmax over w * cos(source_k, target). Throws on zero-norm inputs.
Eigen::VectorXd attention_weights(const Eigen::VectorXd& target,
                                  std::span<const Eigen::VectorXd> sources, double w);

struct MessagePassStats {
  std::size_t edge_computations = 0;
};

struct IterationTrace {
  Eigen::MatrixXd input;       // d x N
  Eigen::MatrixXd aggregated;  // d x N, sum_k a_k f_k
  Eigen::MatrixXd output;      // d x N, post-ReLU
  std::vector<Eigen::VectorXd> similarity;  // per node, over its in-edges
  std::vector<Eigen::VectorXd> weights;
};

struct GnnTrace {
  std::vector<std::vector<int>> sources;  // active in-edge sources per node
  std::vector<IterationTrace> iterations;
  Eigen::MatrixXd affinity_input;  // head input, one column per (i, j)
  Mlp::Cache head_cache;
  Eigen::MatrixXd affinity;        // N_T x N_D
};

// Stacks the node features of `graph` into a d x N matrix.
Eigen::MatrixXd node_features(const STGraph& graph);

Eigen::MatrixXd message_pass(const STGraph& graph, const Eigen::MatrixXd& features,
                             const GnnParams& params, MessagePassStats* stats = nullptr,
                             GnnTrace* trace = nullptr);

// Head applied to the given features as they are (no normalization).
double affinity(const Eigen::VectorXd& track_feature, const Eigen::VectorXd& det_feature,
                const Mlp& head, Combine combine = Combine::kProduct);

// Affinity for every (tracklet, detection) pair from final node features.
Eigen::MatrixXd affinity_matrix(const STGraph& graph, const Eigen::MatrixXd& final_features,
                                const GnnParams& params, GnnTrace* trace = nullptr);

// Full forward pass: message passing then the affinity matrix.
Eigen::MatrixXd gnn_forward(const STGraph& graph, const GnnParams& params,
                            GnnTrace* trace = nullptr, MessagePassStats* stats = nullptr);

// Reverse pass for a loss with gradient `grad_affinity` (N_T x N_D) at the
// traced forward call. Gradients accumulate into `grad`; the gradient with
// respect to the input node features is written when requested.
void gnn_backward(const STGraph& graph, const GnnParams& params, const GnnTrace& trace,
                  const Eigen::MatrixXd& grad_affinity, GnnParams& grad,
                  Eigen::MatrixXd* grad_features = nullptr);

}  // namespace detectrack
