#include "detectrack/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace detectrack {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : engine_(splitmix64(splitmix64(seed) ^ (stream * 0xD1B54A32D192ED03ULL))) {}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: empty range");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

int Rng::poisson(double mean) {
  if (mean <= 0) return 0;
  const double bound = std::exp(-mean);
  int k = 0;
  double p = uniform();
  while (p > bound) {
    ++k;
    p *= uniform();
  }
  return k;
}

Eigen::VectorXd numeric_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& params, double eps) {
  Eigen::VectorXd probe = params;
  Eigen::VectorXd grad(params.size());
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double saved = probe(i);
    probe(i) = saved + eps;
    const double up = f(probe);
    probe(i) = saved - eps;
    const double down = f(probe);
    probe(i) = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::domain_error("grad_check: objective is not finite near the probe point");
    }
    grad(i) = (up - down) / (2 * eps);
  }
  return grad;
}

GradCheckResult grad_check(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& params, const Eigen::VectorXd& analytic, double eps,
    double floor) {
  if (analytic.size() != params.size()) {
    throw std::invalid_argument("grad_check: gradient size does not match parameters");
  }
  GradCheckResult result;
  result.numeric = numeric_gradient(f, params, eps);
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double a = analytic(i), n = result.numeric(i);
    const double denom = std::max({std::abs(a), std::abs(n), floor});
    const double rel = std::abs(a - n) / denom;
    if (rel > result.max_rel_error || result.worst_index < 0) {
      result.max_rel_error = rel;
      result.worst_index = i;
    }
  }
  return result;
}

void init_uniform_fan_in(Eigen::Ref<Eigen::MatrixXd> weights, int fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / std::max(fan_in, 1));
  for (Eigen::Index j = 0; j < weights.cols(); ++j) {
    for (Eigen::Index i = 0; i < weights.rows(); ++i) {
      weights(i, j) = rng.uniform(-bound, bound);
    }
  }
}

void init_conv(Conv3x3& conv, Rng& rng) {
  const int fan_in = static_cast<int>(conv.in_channels() * 9);
  const double bound = std::sqrt(1.0 / std::max(fan_in, 1));
  double* data = conv.kernel.data();
  for (Eigen::Index i = 0; i < conv.kernel.size(); ++i) {
    data[i] = rng.uniform(-bound, bound);
  }
  for (Eigen::Index i = 0; i < conv.bias.size(); ++i) {
    conv.bias(i) = rng.uniform(-bound, bound);
  }
}

}  // namespace detectrack
