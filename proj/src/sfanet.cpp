#include "detectrack/sfanet.hpp"

#include <stdexcept>

namespace detectrack {

ParamBlock make_block(std::string name, Tensor4& t) {
  return {std::move(name),
          {t.dimension(0), t.dimension(1), t.dimension(2), t.dimension(3)},
          t.data(),
          t.size()};
}

SfaNet SfaNet::zeros(int channels, int depth, int hidden) {
  if (channels <= 0 || depth < 1 || hidden <= 0) {
    throw std::invalid_argument("SfaNet: channels, depth and hidden width must be positive");
  }
  SfaNet net;
  int in = 2 * channels;
  for (int l = 0; l < depth; ++l) {
    const int out = (l + 1 == depth) ? 1 : hidden;
    net.layers.emplace_back(in, out);
    in = out;
  }
  return net;
}

SfaNet SfaNet::random(int channels, int depth, int hidden, Rng& rng) {
  SfaNet net = zeros(channels, depth, hidden);
  for (auto& conv : net.layers) init_conv(conv, rng);
  return net;
}

int SfaNet::input_channels() const {
  return layers.empty() ? 0 : static_cast<int>(layers.front().in_channels());
}

SfaNet SfaNet::zeros_like() const {
  SfaNet out = *this;
  for (auto& conv : out.layers) {
    conv.kernel.setZero();
    conv.bias.setZero();
  }
  return out;
}

void SfaNet::append_params(ParamList& out, const std::string& prefix) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string base = prefix + ".conv" + std::to_string(l);
    out.push_back(make_block(base + ".kernel", layers[l].kernel));
    out.push_back(make_block(base + ".bias", layers[l].bias));
  }
}

void SfaNetPair::append_params(ParamList& out, const std::string& prefix) {
  camera.append_params(out, prefix + ".camera");
  bev.append_params(out, prefix + ".bev");
}

namespace {

void check_pair(const FeatureMap& current, const FeatureMap& previous,
                const SfaNet& net) {
  if (current.view != previous.view) {
    throw std::invalid_argument("sfanet: feature maps come from different views");
  }
  if (current.tensor.dimensions() != previous.tensor.dimensions()) {
    throw std::invalid_argument("sfanet: feature maps differ in shape");
  }
  if (current.timestamp != previous.timestamp + 1) {
    throw std::invalid_argument("sfanet: feature maps are not consecutive frames");
  }
  if (net.layers.empty() || net.input_channels() != 2 * current.tensor.dimension(0)) {
    throw std::invalid_argument("sfanet: conv input width must equal 2 * channels");
  }
}

Tensor3 run_stack(const Tensor3& current, const Tensor3& previous,
                  const SfaNet& net, SfaCache* cache) {
  Tensor3 h = current.concatenate(previous, 0);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (cache != nullptr) cache->layer_inputs.push_back(h);
    Tensor3 z = conv3x3(h, net.layers[l]);
    if (l + 1 == net.layers.size()) {
      z = z.unaryExpr([](double v) { return sigmoid(v); });
    } else {
      z = z.cwiseMax(0.0);
    }
    if (cache != nullptr) cache->layer_outputs.push_back(z);
    h = std::move(z);
  }
  return h;
}

FeatureMap blend(const FeatureMap& current, const Tensor3& previous,
                 const Tensor3& attention) {
  FeatureMap out = current;
  const auto c = current.tensor.dimension(0), nx = current.tensor.dimension(1),
             ny = current.tensor.dimension(2);
  for (Eigen::Index ch = 0; ch < c; ++ch) {
    for (Eigen::Index x = 0; x < nx; ++x) {
      for (Eigen::Index y = 0; y < ny; ++y) {
        const double a = attention(0, x, y);
        const double a_prev = 1.0 - a;
        out.tensor(ch, x, y) = a * current.tensor(ch, x, y) + a_prev * previous(ch, x, y);
      }
    }
  }
  return out;
}

}  // namespace

std::pair<AttentionMap, AttentionMap> attention_maps(const FeatureMap& current,
                                                     const FeatureMap& previous,
                                                     const SfaNet& net) {
  check_pair(current, previous, net);
  AttentionMap a_t{run_stack(current.tensor, previous.tensor, net, nullptr)};
  AttentionMap a_prev{a_t.tensor.unaryExpr([](double v) { return 1.0 - v; })};
  return {std::move(a_t), std::move(a_prev)};
}

FeatureMap aggregate(const FeatureMap& current, const FeatureMap* previous,
                     const SfaNet& net) {
  if (previous == nullptr) return current;
  check_pair(current, *previous, net);
  const Tensor3 attention = run_stack(current.tensor, previous->tensor, net, nullptr);
  return blend(current, previous->tensor, attention);
}

FeatureMap aggregate(const FeatureMap& current, const FeatureMap& previous,
                     const SfaNet& net, SfaCache& cache) {
  check_pair(current, previous, net);
  cache = SfaCache{};
  cache.current = current.tensor;
  cache.previous = previous.tensor;
  const Tensor3 attention = run_stack(current.tensor, previous.tensor, net, &cache);
  return blend(current, previous.tensor, attention);
}

void aggregate_backward(const SfaCache& cache, const SfaNet& net,
                        const Tensor3& grad_out, SfaNet& grad,
                        Tensor3* grad_current, Tensor3* grad_previous) {
  const auto c = cache.current.dimension(0), nx = cache.current.dimension(1),
             ny = cache.current.dimension(2);
  const Tensor3& attention = cache.layer_outputs.back();

  // Through the blend into the attention logits.
  Tensor3 g(1, nx, ny);
  g.setZero();
  for (Eigen::Index ch = 0; ch < c; ++ch) {
    for (Eigen::Index x = 0; x < nx; ++x) {
      for (Eigen::Index y = 0; y < ny; ++y) {
        g(0, x, y) += grad_out(ch, x, y) * (cache.current(ch, x, y) - cache.previous(ch, x, y));
      }
    }
  }
  for (Eigen::Index x = 0; x < nx; ++x) {
    for (Eigen::Index y = 0; y < ny; ++y) {
      const double a = attention(0, x, y);
      g(0, x, y) *= a * (1.0 - a);
    }
  }

  const bool want_input = grad_current != nullptr || grad_previous != nullptr;
  Tensor3 grad_stack_input;
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    if (l + 1 != net.layers.size()) {
      const Tensor3& out = cache.layer_outputs[l];
      g = (out > 0.0).select(g, g.constant(0.0));
    }
    Tensor3 grad_in;
    const bool need_in = l > 0 || want_input;
    conv3x3_backward(cache.layer_inputs[l], net.layers[l], g, grad.layers[l],
                     need_in ? &grad_in : nullptr);
    if (l == 0) {
      grad_stack_input = std::move(grad_in);
    } else {
      g = std::move(grad_in);
    }
  }

  if (grad_current != nullptr) {
    grad_current->resize(c, nx, ny);
  }
  if (grad_previous != nullptr) {
    grad_previous->resize(c, nx, ny);
  }
  if (!want_input) return;
  for (Eigen::Index ch = 0; ch < c; ++ch) {
    for (Eigen::Index x = 0; x < nx; ++x) {
      for (Eigen::Index y = 0; y < ny; ++y) {
        const double a = attention(0, x, y);
        if (grad_current != nullptr) {
          (*grad_current)(ch, x, y) = a * grad_out(ch, x, y) + grad_stack_input(ch, x, y);
        }
        if (grad_previous != nullptr) {
          (*grad_previous)(ch, x, y) =
              (1.0 - a) * grad_out(ch, x, y) + grad_stack_input(c + ch, x, y);
        }
      }
    }
  }
}

}  // namespace detectrack
