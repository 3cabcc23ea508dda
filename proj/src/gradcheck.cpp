#include "detectrack/gradcheck.hpp"

#include "detectrack/sfanet.hpp"
#include "detectrack/sggnn.hpp"
#include "detectrack/tracker.hpp"
#include "detectrack/trkdet.hpp"

#include <algorithm>
#include <functional>

namespace detectrack {

namespace {

// Central differences over all blocks at once, reported per block.
template <typename Model>
void check_model(Model& model, Model& grad, const std::function<double()>& loss,
                 const std::string& prefix, double eps, std::vector<GradCheckEntry>& out) {
  ParamList params, grads;
  model.append_params(params, prefix);
  grad.append_params(grads, prefix);
  const Eigen::VectorXd x0 = flatten(params);
  const Eigen::VectorXd analytic = flatten(grads);
  const auto f = [&](const Eigen::VectorXd& x) {
    assign(params, x);
    return loss();
  };
  const GradCheckResult r = grad_check(f, x0, analytic, eps);
  assign(params, x0);
  Eigen::Index offset = 0;
  for (const auto& b : params) {
    double worst = 0;
    for (Eigen::Index i = 0; i < b.size; ++i) {
      const double a = analytic(offset + i), n = r.numeric(offset + i);
      const double denom = std::max({std::abs(a), std::abs(n), 1e-6});
      worst = std::max(worst, std::abs(a - n) / denom);
    }
    out.push_back({b.name, b.size, worst});
    offset += b.size;
  }
}

Box3D box_at(double x, double y, double yaw) {
  return Box3D(Eigen::Vector3d(x, y, 0.8), Eigen::Vector3d(4.0, 1.8, 1.6), yaw, 0.9, 0);
}

Eigen::VectorXd random_vector(int dim, Rng& rng) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.normal();
  return v;
}

void check_gnn(std::uint64_t seed, double eps, std::vector<GradCheckEntry>& out) {
  Rng rng(seed, 11);
  GnnConfig cfg;
  cfg.dim = 8;
  cfg.head_hidden = {8, 8};
  GnnParams params = GnnParams::random(cfg, rng);
  for (auto& layer : params.layers) layer.w_att = rng.uniform(0.5, 2.0);

  DetectionSet dets;
  Tracklet tracks;
  for (int j = 0; j < 2; ++j) {
    dets.boxes.push_back(box_at(2.0 * j, 1.0, 0.1 * j));
    dets.features.push_back({random_vector(cfg.dim, rng), FeatureSource::kDetection, j, 1});
  }
  for (int i = 0; i < 3; ++i) {
    tracks.entries.push_back({i + 1, box_at(2.0 * i - 0.5, 0.5, 0.2),
                              {random_vector(cfg.dim, rng), FeatureSource::kTracklet, i, 0}, 1, 0});
  }
  const STGraph graph = build_graph(dets, tracks);
  Eigen::MatrixXd target = Eigen::MatrixXd::Zero(3, 2);
  target(0, 0) = 1;
  target(1, 1) = 1;

  GnnParams grad = params.zeros_like();
  GnnTrace trace;
  Eigen::MatrixXd g;
  tracking_loss(gnn_forward(graph, params, &trace), target, &g);
  gnn_backward(graph, params, trace, g, grad);
  check_model(params, grad, [&] { return tracking_loss(gnn_forward(graph, params), target); },
              "gnn", eps, out);
}

void check_calibration(std::uint64_t seed, double eps, std::vector<GradCheckEntry>& out) {
  Rng rng(seed, 12);
  const int dim = 8;
  Calibrators heads = Calibrators::random(dim, {8}, rng);
  std::vector<CalibrationSample> samples;
  for (int k = 0; k < 6; ++k) {
    samples.push_back({random_vector(dim, rng), random_vector(dim, rng), rng.uniform(0.1, 0.9),
                       rng.uniform(0.0, 1.0), k % 2});
  }
  Calibrators grad = heads.zeros_like();
  calibration_loss(samples, heads, &grad);
  check_model(heads, grad, [&] { return calibration_loss(samples, heads, nullptr); },
              "calibration", eps, out);
}

void check_sfanet(std::uint64_t seed, double eps, std::vector<GradCheckEntry>& out) {
  Rng rng(seed, 13);
  const int channels = 3;
  SfaNetPair nets{SfaNet::random(channels, 2, 4, rng), SfaNet::random(channels, 2, 4, rng)};
  const auto random_map = [&](int t, View view) {
    FeatureMap m;
    m.tensor.resize(channels, 6, 5);
    for (Eigen::Index i = 0; i < m.tensor.size(); ++i) m.tensor.data()[i] = rng.normal();
    m.timestamp = t;
    m.view = view;
    return m;
  };
  const FeatureMap cam_prev = random_map(0, View::kCameraView), cam_cur = random_map(1, View::kCameraView);
  const FeatureMap bev_prev = random_map(0, View::kBev), bev_cur = random_map(1, View::kBev);
  Tensor3 weights(channels, 6, 5);
  for (Eigen::Index i = 0; i < weights.size(); ++i) weights.data()[i] = rng.normal();

  const auto weighted_sum = [&](const Tensor3& t) {
    double s = 0;
    for (Eigen::Index i = 0; i < t.size(); ++i) s += weights.data()[i] * t.data()[i];
    return s;
  };
  const auto loss = [&] {
    return weighted_sum(aggregate(cam_cur, &cam_prev, nets.camera).tensor) +
           weighted_sum(aggregate(bev_cur, &bev_prev, nets.bev).tensor);
  };
  SfaNetPair grad{nets.camera.zeros_like(), nets.bev.zeros_like()};
  SfaCache cache_cam, cache_bev;
  aggregate(cam_cur, cam_prev, nets.camera, cache_cam);
  aggregate(bev_cur, bev_prev, nets.bev, cache_bev);
  aggregate_backward(cache_cam, nets.camera, weights, grad.camera);
  aggregate_backward(cache_bev, nets.bev, weights, grad.bev);
  check_model(nets, grad, loss, "sfanet", eps, out);
}

}  // namespace

std::vector<GradCheckEntry> run_gradcheck_suite(std::uint64_t seed, double eps) {
  std::vector<GradCheckEntry> out;
  check_gnn(seed, eps, out);
  check_calibration(seed, eps, out);
  check_sfanet(seed, eps, out);
  return out;
}

}  // namespace detectrack
