#include "detectrack/trkdet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace detectrack {

double nearest_tracklet_iou(const Box3D& box, const Tracklet& tracklet) {
  const BoxBEV footprint = to_bev(box);
  double best = 0;
  for (const auto& entry : tracklet.entries) {
    best = std::max(best, iou_bev(footprint, to_bev(entry.box)));
  }
  return best;
}

Eigen::VectorXd calibration_input(const Eigen::VectorXd& feature, double score,
                                  double tracklet_iou) {
  Eigen::VectorXd x(feature.size() + 2);
  x << feature, score, tracklet_iou;
  return x;
}

double calibrate_score(const Eigen::VectorXd& feature, double raw_score,
                       double tracklet_iou, const Mlp& head) {
  if (head.input_width() != feature.size() + 2) {
    throw std::invalid_argument("calibrate_score: head expects width " +
                                std::to_string(head.input_width()) + ", got " +
                                std::to_string(feature.size() + 2));
  }
  return head.forward(calibration_input(feature, raw_score, tracklet_iou))(0, 0);
}

double cosine_weight(const Eigen::VectorXd& current, const Eigen::VectorXd& previous) {
  if (current.size() != previous.size()) {
    throw std::invalid_argument("cosine_weight: dimension mismatch");
  }
  const double denom = current.norm() * previous.norm();
  if (!(denom > 0)) {
    throw std::domain_error("cosine_weight: zero-norm feature");
  }
  return std::clamp(current.dot(previous) / denom, -1.0, 1.0);
}

double cosine_weight(const Tensor3& current, const Tensor3& previous) {
  return cosine_weight(global_avg_pool(current), global_avg_pool(previous));
}

Eigen::VectorXd aggregate_instance(const Eigen::VectorXd& current,
                                   const Eigen::VectorXd& previous) {
  return current + cosine_weight(current, previous) * previous;
}

LossValue focal_loss(double p, int label, double gamma, double alpha) {
  constexpr double kLo = 1e-7, kHi = 1.0 - 1e-7;
  const bool clamped = p < kLo || p > kHi;
  p = std::clamp(p, kLo, kHi);
  const double pt = label == 1 ? p : 1.0 - p;
  const double one_minus = 1.0 - pt;
  const double log_pt = std::log(pt);
  const double modulator = std::pow(one_minus, gamma);
  LossValue out;
  out.value = -alpha * modulator * log_pt;
  if (!clamped) {
    const double dmod = gamma == 0 ? 0.0 : -gamma * std::pow(one_minus, gamma - 1);
    const double dpt = -alpha * (dmod * log_pt + modulator / pt);
    out.grad = label == 1 ? dpt : -dpt;
  }
  return out;
}

double smooth_l1(double pred, double target) {
  const double d = std::abs(pred - target);
  return d < 1.0 ? 0.5 * d * d : d - 0.5;
}

double smooth_l1(const Eigen::VectorXd& pred, const Eigen::VectorXd& target,
                 Eigen::VectorXd* grad) {
  if (pred.size() != target.size()) {
    throw std::invalid_argument("smooth_l1: size mismatch");
  }
  if (grad != nullptr) grad->resize(pred.size());
  double total = 0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double d = pred(i) - target(i);
    total += smooth_l1(pred(i), target(i));
    if (grad != nullptr) {
      (*grad)(i) = std::abs(d) < 1.0 ? d : (d > 0 ? 1.0 : -1.0);
    }
  }
  return total;
}

Calibrators Calibrators::random(int feature_dim, const std::vector<int>& hidden, Rng& rng) {
  Calibrators out;
  out.objectness = make_score_head(feature_dim + 2, hidden, rng);
  out.classification = make_score_head(feature_dim + 2, hidden, rng);
  return out;
}

Calibrators Calibrators::zeros_like() const {
  return {objectness.zeros_like(), classification.zeros_like()};
}

void Calibrators::append_params(ParamList& out, const std::string& prefix) {
  objectness.append_params(out, prefix + ".objectness");
  classification.append_params(out, prefix + ".classification");
}

CalibrationResult calibrate_candidate(const Eigen::VectorXd& feature,
                                      const Eigen::VectorXd& refined,
                                      double raw_score, double tracklet_iou,
                                      const Calibrators& heads) {
  CalibrationResult out;
  out.tracklet_iou = tracklet_iou;
  out.objectness = calibrate_score(feature, raw_score, tracklet_iou, heads.objectness);
  out.classification =
      calibrate_score(refined, out.objectness, tracklet_iou, heads.classification);
  return out;
}

Eigen::VectorXd refine_from_maps(const Tensor3& map_current,
                                 const Tensor3& map_previous,
                                 const BoxBEV& footprint, const GridFrame& frame,
                                 PoolGrid grid) {
  const Eigen::VectorXd g_t = global_avg_pool(roi_pool(map_current, footprint, frame, grid));
  const Eigen::VectorXd g_prev = global_avg_pool(roi_pool(map_previous, footprint, frame, grid));
  if (g_t.norm() == 0 || g_prev.norm() == 0) return g_t;
  return aggregate_instance(g_t, g_prev);
}

double calibration_loss(const std::vector<CalibrationSample>& samples,
                        const Calibrators& heads, Calibrators* grad, double gamma,
                        double alpha) {
  if (samples.empty()) return 0;
  const double scale = 1.0 / static_cast<double>(samples.size());
  double total = 0;
  for (const auto& s : samples) {
    Mlp::Cache obj_cache, cls_cache;
    const double obj =
        heads.objectness.forward(calibration_input(s.feature, s.raw_score, s.tracklet_iou), obj_cache)(0, 0);
    const double cls =
        heads.classification.forward(calibration_input(s.refined, obj, s.tracklet_iou), cls_cache)(0, 0);
    const LossValue l_obj = focal_loss(obj, s.label, gamma, alpha);
    const LossValue l_cls = focal_loss(cls, s.label, gamma, alpha);
    total += scale * (l_obj.value + l_cls.value);
    if (grad == nullptr) continue;
    const Eigen::MatrixXd d_cls = Eigen::MatrixXd::Constant(1, 1, scale * l_cls.grad);
    const Eigen::MatrixXd d_cls_in = heads.classification.backward(cls_cache, d_cls, grad->classification);
    // The proposal score is an input of the refinement head.
    const double d_obj = scale * l_obj.grad + d_cls_in(s.refined.size(), 0);
    heads.objectness.backward(obj_cache, Eigen::MatrixXd::Constant(1, 1, d_obj), grad->objectness);
  }
  return total;
}

}  // namespace detectrack
