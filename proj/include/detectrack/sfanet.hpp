#pragma once

// Gated temporal aggregation of consecutive feature maps. A small 3x3 conv
// stack over the channel-concatenated pair produces one attention channel
// A_t = sigmoid(conv(F_t ++ F_prev)); the output is the per-pixel convex
// blend A_t * F_t + (1 - A_t) * F_prev, broadcast over channels.

#include "detectrack/numerics.hpp"
#include "detectrack/params.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace detectrack {

enum class View { kCameraView, kBev };

struct FeatureMap {
  Tensor3 tensor;  // [C, X, Y]
  int timestamp = 0;
  View view = View::kBev;
};

struct AttentionMap {
  Tensor3 tensor;  // [1, X, Y], values in (0, 1)
};

// Conv stack for one view. Hidden layers are ReLU; the last layer has a
// single output channel and feeds the sigmoid.
struct SfaNet {
  std::vector<Conv3x3> layers;

  // depth >= 1 conv layers; hidden layers have `hidden` channels.
  static SfaNet random(int channels, int depth, int hidden, Rng& rng);
  static SfaNet zeros(int channels, int depth = 1, int hidden = 8);

  int input_channels() const;
  SfaNet zeros_like() const;
  void append_params(ParamList& out, const std::string& prefix);
};

// Camera-view and BEV streams carry separate weights.
struct SfaNetPair {
  SfaNet camera;
  SfaNet bev;

  const SfaNet& for_view(View v) const { return v == View::kBev ? bev : camera; }
  SfaNet& for_view(View v) { return v == View::kBev ? bev : camera; }
  void append_params(ParamList& out, const std::string& prefix);
};

struct SfaCache {
  Tensor3 current;
  Tensor3 previous;
  std::vector<Tensor3> layer_inputs;  // input to each conv layer
  std::vector<Tensor3> layer_outputs; // post-activation (last is attention)
};

std::pair<AttentionMap, AttentionMap> attention_maps(const FeatureMap& current,
                                                     const FeatureMap& previous,
                                                     const SfaNet& net);

// Without a previous frame the current map is returned unchanged.
FeatureMap aggregate(const FeatureMap& current, const FeatureMap* previous,
                     const SfaNet& net);
FeatureMap aggregate(const FeatureMap& current, const FeatureMap& previous,
                     const SfaNet& net, SfaCache& cache);

// Backward pass of the cached aggregate call. Parameter gradients accumulate
// into `grad`; input gradients are written when the pointers are non-null.
void aggregate_backward(const SfaCache& cache, const SfaNet& net,
                        const Tensor3& grad_out, SfaNet& grad,
                        Tensor3* grad_current = nullptr,
                        Tensor3* grad_previous = nullptr);

ParamBlock make_block(std::string name, Tensor4& t);

}  // namespace detectrack
