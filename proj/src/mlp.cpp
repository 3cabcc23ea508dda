#include "detectrack/mlp.hpp"

#include <stdexcept>

namespace detectrack {

Eigen::Index total_size(const ParamList& params) {
  Eigen::Index n = 0;
  for (const auto& block : params) n += block.size;
  return n;
}

Eigen::VectorXd flatten(const ParamList& params) {
  Eigen::VectorXd out(total_size(params));
  Eigen::Index offset = 0;
  for (const auto& block : params) {
    out.segment(offset, block.size) = Eigen::Map<const Eigen::VectorXd>(block.data, block.size);
    offset += block.size;
  }
  return out;
}

void assign(const ParamList& params, const Eigen::VectorXd& values) {
  if (values.size() != total_size(params)) {
    throw std::invalid_argument("assign: value count does not match parameter layout");
  }
  Eigen::Index offset = 0;
  for (const auto& block : params) {
    Eigen::Map<Eigen::VectorXd>(block.data, block.size) = values.segment(offset, block.size);
    offset += block.size;
  }
}

void set_zero(const ParamList& params) {
  for (const auto& block : params) {
    Eigen::Map<Eigen::VectorXd>(block.data, block.size).setZero();
  }
}

namespace {

void apply_activation(Activation act, Eigen::MatrixXd& z) {
  switch (act) {
    case Activation::kRelu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::kSigmoid:
      z = z.unaryExpr([](double v) { return sigmoid(v); });
      break;
    case Activation::kIdentity:
      break;
  }
}

// d(out)/d(pre) expressed through the activation output.
Eigen::MatrixXd activation_grad(Activation act, const Eigen::MatrixXd& out,
                                const Eigen::MatrixXd& grad_out) {
  switch (act) {
    case Activation::kRelu:
      return (out.array() > 0.0).select(grad_out, 0.0);
    case Activation::kSigmoid:
      return (grad_out.array() * out.array() * (1.0 - out.array())).matrix();
    case Activation::kIdentity:
      break;
  }
  return grad_out;
}

}  // namespace

Mlp::Mlp(const std::vector<int>& widths, const std::vector<Activation>& activations) {
  if (widths.size() < 2 || activations.size() + 1 != widths.size()) {
    throw std::invalid_argument("Mlp: need one activation per layer and at least one layer");
  }
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    if (widths[i] <= 0 || widths[i + 1] <= 0) {
      throw std::invalid_argument("Mlp: layer widths must be positive");
    }
    layers_.push_back({Eigen::MatrixXd::Zero(widths[i + 1], widths[i]),
                       Eigen::VectorXd::Zero(widths[i + 1]), activations[i]});
  }
}

Mlp Mlp::random(const std::vector<int>& widths,
                const std::vector<Activation>& activations, Rng& rng) {
  Mlp mlp(widths, activations);
  for (auto& layer : mlp.layers_) {
    const int fan_in = static_cast<int>(layer.weight.cols());
    init_uniform_fan_in(layer.weight, fan_in, rng);
    init_uniform_fan_in(layer.bias, fan_in, rng);
  }
  return mlp;
}

int Mlp::input_width() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols());
}

int Mlp::output_width() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows());
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  Cache scratch;
  return forward(x, scratch);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache& cache) const {
  if (x.rows() != input_width()) {
    throw std::invalid_argument("Mlp: input width " + std::to_string(x.rows()) +
                                " does not match " + std::to_string(input_width()));
  }
  cache.inputs.clear();
  cache.outputs.clear();
  Eigen::MatrixXd h = x;
  for (const auto& layer : layers_) {
    cache.inputs.push_back(h);
    Eigen::MatrixXd z = layer.weight * h;
    z.colwise() += layer.bias;
    apply_activation(layer.activation, z);
    cache.outputs.push_back(z);
    h = std::move(z);
  }
  return h;
}

Eigen::MatrixXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& grad_out,
                              Mlp& grad) const {
  Eigen::MatrixXd g = grad_out;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& layer = layers_[k];
    const Eigen::MatrixXd dz = activation_grad(layer.activation, cache.outputs[k], g);
    grad.layers_[k].weight.noalias() += dz * cache.inputs[k].transpose();
    grad.layers_[k].bias += dz.rowwise().sum();
    g.noalias() = layer.weight.transpose() * dz;
  }
  return g;
}

Mlp Mlp::zeros_like() const {
  Mlp out = *this;
  for (auto& layer : out.layers_) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  return out;
}

void Mlp::append_params(ParamList& out, const std::string& prefix) {
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const std::string base = prefix + ".fc" + std::to_string(k);
    out.push_back(make_block(base + ".weight", layers_[k].weight));
    out.push_back(make_block(base + ".bias", layers_[k].bias));
  }
}

Mlp make_score_head(int input_width, const std::vector<int>& hidden, Rng& rng) {
  std::vector<int> widths{input_width};
  std::vector<Activation> acts;
  for (int h : hidden) {
    widths.push_back(h);
    acts.push_back(Activation::kRelu);
  }
  widths.push_back(1);
  acts.push_back(Activation::kSigmoid);
  return Mlp::random(widths, acts, rng);
}

}  // namespace detectrack
