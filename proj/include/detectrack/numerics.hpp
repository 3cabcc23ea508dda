#pragma once

// Dense kernels shared by the aggregation, calibration and graph modules.

#include "detectrack/geometry.hpp"

#include <Eigen/Core>
#include <unsupported/Eigen/CXX11/Tensor>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>

namespace detectrack {

template <typename Scalar>
using Tensor3T = Eigen::Tensor<Scalar, 3, Eigen::RowMajor>;
template <typename Scalar>
using Tensor4T = Eigen::Tensor<Scalar, 4, Eigen::RowMajor>;
using Tensor3 = Tensor3T<double>;
using Tensor4 = Tensor4T<double>;

// Seeded generator. Streams derived from the same seed are independent, so
// each model or scene component draws from its own stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  // 53-bit uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  std::uint64_t next_u64() { return engine_(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  int poisson(double mean);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= 0) {
    return Scalar(1) / (Scalar(1) + std::exp(-x));
  }
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(
    const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out =
      (logits.array() - logits.maxCoeff()).exp().matrix();
  out /= out.sum();
  return out;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> global_avg_pool(
    const Tensor3T<Scalar>& map) {
  const auto c = map.dimension(0), x = map.dimension(1), y = map.dimension(2);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(c);
  const Scalar denom = Scalar(x * y);
  for (Eigen::Index ch = 0; ch < c; ++ch) {
    Scalar acc = 0;
    for (Eigen::Index i = 0; i < x; ++i) {
      for (Eigen::Index j = 0; j < y; ++j) acc += map(ch, i, j);
    }
    out(ch) = acc / denom;
  }
  return out;
}

// 3x3 convolution with zero padding of one cell; output keeps the spatial
// size. kernel has shape (out, in, 3, 3).
template <typename Scalar>
struct Conv3x3T {
  Tensor4T<Scalar> kernel;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> bias;

  Conv3x3T() = default;
  Conv3x3T(Eigen::Index in_channels, Eigen::Index out_channels)
      : kernel(out_channels, in_channels, 3, 3),
        bias(Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(out_channels)) {
    kernel.setZero();
  }

  Eigen::Index in_channels() const { return kernel.dimension(1); }
  Eigen::Index out_channels() const { return kernel.dimension(0); }
};
using Conv3x3 = Conv3x3T<double>;

template <typename Scalar>
Tensor3T<Scalar> conv3x3(const Tensor3T<Scalar>& input,
                         const Conv3x3T<Scalar>& conv) {
  const auto cin = input.dimension(0), nx = input.dimension(1),
             ny = input.dimension(2);
  if (cin != conv.in_channels()) {
    throw std::invalid_argument("conv3x3: input channels do not match kernel");
  }
  const auto cout = conv.out_channels();
  Tensor3T<Scalar> out(cout, nx, ny);
  for (Eigen::Index o = 0; o < cout; ++o) {
    for (Eigen::Index x = 0; x < nx; ++x) {
      for (Eigen::Index y = 0; y < ny; ++y) {
        Scalar acc = 0;
        for (Eigen::Index c = 0; c < cin; ++c) {
          for (int kx = 0; kx < 3; ++kx) {
            const Eigen::Index sx = x + kx - 1;
            if (sx < 0 || sx >= nx) continue;
            for (int ky = 0; ky < 3; ++ky) {
              const Eigen::Index sy = y + ky - 1;
              if (sy < 0 || sy >= ny) continue;
              acc += conv.kernel(o, c, kx, ky) * input(c, sx, sy);
            }
          }
        }
        out(o, x, y) = acc + conv.bias(o);
      }
    }
  }
  return out;
}

// Accumulates parameter gradients into `grad` (same shapes as `conv`) and,
// when requested, writes the gradient with respect to the input.
template <typename Scalar>
void conv3x3_backward(const Tensor3T<Scalar>& input,
                      const Conv3x3T<Scalar>& conv,
                      const Tensor3T<Scalar>& grad_out, Conv3x3T<Scalar>& grad,
                      Tensor3T<Scalar>* grad_input) {
  const auto cin = input.dimension(0), nx = input.dimension(1),
             ny = input.dimension(2);
  const auto cout = conv.out_channels();
  if (grad_input != nullptr) {
    grad_input->resize(cin, nx, ny);
    grad_input->setZero();
  }
  for (Eigen::Index o = 0; o < cout; ++o) {
    for (Eigen::Index x = 0; x < nx; ++x) {
      for (Eigen::Index y = 0; y < ny; ++y) {
        const Scalar g = grad_out(o, x, y);
        if (g == 0) continue;
        grad.bias(o) += g;
        for (Eigen::Index c = 0; c < cin; ++c) {
          for (int kx = 0; kx < 3; ++kx) {
            const Eigen::Index sx = x + kx - 1;
            if (sx < 0 || sx >= nx) continue;
            for (int ky = 0; ky < 3; ++ky) {
              const Eigen::Index sy = y + ky - 1;
              if (sy < 0 || sy >= ny) continue;
              grad.kernel(o, c, kx, ky) += g * input(c, sx, sy);
              if (grad_input != nullptr) {
                (*grad_input)(c, sx, sy) += g * conv.kernel(o, c, kx, ky);
              }
            }
          }
        }
      }
    }
  }
}

// Maps ground-plane meters onto feature-map cells. Cell (i, j) covers
// [origin_x + i*cell, origin_x + (i+1)*cell) x [origin_y + j*cell, ...).
struct GridFrame {
  double origin_x = 0;
  double origin_y = 0;
  double cell_size = 1;
};

struct PoolGrid {
  int rows = 7;
  int cols = 7;
};

// Bilinear sample at continuous cell coordinates (cell centers at integers);
// taps that fall outside the map contribute zero.
template <typename Scalar>
Scalar bilinear_sample(const Tensor3T<Scalar>& map, Eigen::Index channel,
                       Scalar u, Scalar v) {
  const auto nx = map.dimension(1), ny = map.dimension(2);
  const Scalar fu = std::floor(u), fv = std::floor(v);
  const Eigen::Index x0 = static_cast<Eigen::Index>(fu);
  const Eigen::Index y0 = static_cast<Eigen::Index>(fv);
  const Scalar du = u - fu, dv = v - fv;
  Scalar acc = 0;
  for (int a = 0; a < 2; ++a) {
    const Eigen::Index x = x0 + a;
    if (x < 0 || x >= nx) continue;
    const Scalar wx = a == 0 ? 1 - du : du;
    for (int b = 0; b < 2; ++b) {
      const Eigen::Index y = y0 + b;
      if (y < 0 || y >= ny) continue;
      const Scalar wy = b == 0 ? 1 - dv : dv;
      acc += wx * wy * map(channel, x, y);
    }
  }
  return acc;
}

// RoI-align style pooling: one bilinear sample at the center of each of the
// rows x cols sub-cells of the oriented box footprint.
template <typename Scalar>
Tensor3T<Scalar> roi_pool(const Tensor3T<Scalar>& map, const BoxBev<Scalar>& box,
                          const GridFrame& frame, PoolGrid grid = {}) {
  if (grid.rows <= 0 || grid.cols <= 0) {
    throw std::invalid_argument("roi_pool: empty pooling grid");
  }
  const auto channels = map.dimension(0), nx = map.dimension(1),
             ny = map.dimension(2);
  const Scalar c = std::cos(box.yaw()), s = std::sin(box.yaw());
  Tensor3T<Scalar> out(channels, grid.rows, grid.cols);
  bool any_inside = false;
  for (int i = 0; i < grid.rows; ++i) {
    const Scalar lx = -box.length() / 2 + (i + Scalar(0.5)) * box.length() / grid.rows;
    for (int j = 0; j < grid.cols; ++j) {
      const Scalar ly = -box.width() / 2 + (j + Scalar(0.5)) * box.width() / grid.cols;
      const Scalar px = box.center().x() + c * lx - s * ly;
      const Scalar py = box.center().y() + s * lx + c * ly;
      const Scalar u = (px - frame.origin_x) / frame.cell_size - Scalar(0.5);
      const Scalar v = (py - frame.origin_y) / frame.cell_size - Scalar(0.5);
      if (u > -1 && u < nx && v > -1 && v < ny) any_inside = true;
      for (Eigen::Index ch = 0; ch < channels; ++ch) {
        out(ch, i, j) = bilinear_sample(map, ch, u, v);
      }
    }
  }
  if (!any_inside) {
    throw std::out_of_range("roi_pool: box lies entirely outside the feature map");
  }
  return out;
}

// Central-difference gradient verification.
struct GradCheckResult {
  double max_rel_error = 0;
  Eigen::Index worst_index = -1;
  Eigen::VectorXd numeric;
};

// Relative error per component is |a - n| / max(|a|, |n|, floor); the floor
// keeps exact zeros from dividing by nothing.
GradCheckResult grad_check(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& params, const Eigen::VectorXd& analytic,
    double eps = 1e-5, double floor = 1e-6);

Eigen::VectorXd numeric_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& params, double eps = 1e-5);

// Uniform in [-sqrt(1/fan_in), +sqrt(1/fan_in)].
void init_uniform_fan_in(Eigen::Ref<Eigen::MatrixXd> weights, int fan_in, Rng& rng);
void init_conv(Conv3x3& conv, Rng& rng);

}  // namespace detectrack
