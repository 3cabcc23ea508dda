#pragma once

// Tracklet-aware score calibration and instance-level aggregation, plus the
// detection loss terms used to train the calibrators.

#include "detectrack/mlp.hpp"
#include "detectrack/numerics.hpp"
#include "detectrack/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace detectrack {

struct ScoredCandidate {
  Box3D box;
  double raw_score = 0;
  double tracklet_iou = 0;
  double adjusted_score = 0;
  std::optional<Eigen::VectorXd> pooled_feature;
};

// Highest BEV IoU between `box` and any tracklet box; 0 when nothing overlaps.
double nearest_tracklet_iou(const Box3D& box, const Tracklet& tracklet);

// Input layout fed to a calibration head: feature ++ score ++ iou.
Eigen::VectorXd calibration_input(const Eigen::VectorXd& feature, double score,
                                  double tracklet_iou);

// Replaces the score with the head's sigmoid output.
double calibrate_score(const Eigen::VectorXd& feature, double raw_score,
                       double tracklet_iou, const Mlp& head);

// Cosine similarity; map-shaped inputs are globally average pooled first.
double cosine_weight(const Eigen::VectorXd& current, const Eigen::VectorXd& previous);
double cosine_weight(const Tensor3& current, const Tensor3& previous);

// h = g_t + w(g_t, g_prev) * g_prev
Eigen::VectorXd aggregate_instance(const Eigen::VectorXd& current,
                                   const Eigen::VectorXd& previous);

struct LossValue {
  double value = 0;
  double grad = 0;  // d value / d prediction
};

inline constexpr double kFocalGamma = 2.0;
inline constexpr double kFocalAlpha = 0.25;

// -alpha * (1 - p_t)^gamma * log(p_t), p_t = p for positives and 1 - p for
// negatives. p is clamped to [1e-7, 1 - 1e-7].
LossValue focal_loss(double p, int label, double gamma = kFocalGamma,
                     double alpha = kFocalAlpha);

// Elementwise smoothed L1 with the quadratic region |delta| < 1, summed.
double smooth_l1(double pred, double target);
double smooth_l1(const Eigen::VectorXd& pred, const Eigen::VectorXd& target,
                 Eigen::VectorXd* grad = nullptr);

// Objectness (proposal stage) and classification (refinement stage) heads.
struct Calibrators {
  Mlp objectness;
  Mlp classification;

  static Calibrators random(int feature_dim, const std::vector<int>& hidden, Rng& rng);
  Calibrators zeros_like() const;
  void append_params(ParamList& out, const std::string& prefix);
};

struct CalibrationResult {
  double objectness = 0;      // proposal-stage score
  double classification = 0;  // final adjusted score
  double tracklet_iou = 0;
};

// Two-stage calibration. `refined` is the instance-aggregated feature used by
// the refinement stage (the raw feature when no previous frame is available).
CalibrationResult calibrate_candidate(const Eigen::VectorXd& feature,
                                      const Eigen::VectorXd& refined,
                                      double raw_score, double tracklet_iou,
                                      const Calibrators& heads);

// Refinement feature: pool the same footprint from the aggregated maps at t
// and t-1, reduce each to a vector and aggregate.
Eigen::VectorXd refine_from_maps(const Tensor3& map_current,
                                 const Tensor3& map_previous,
                                 const BoxBEV& footprint, const GridFrame& frame,
                                 PoolGrid grid = {});

struct CalibrationSample {
  Eigen::VectorXd feature;
  Eigen::VectorXd refined;
  double raw_score = 0;
  double tracklet_iou = 0;
  int label = 0;
};

// Mean focal loss of both stages over the samples; gradients accumulate into
// `grad` when non-null.
double calibration_loss(const std::vector<CalibrationSample>& samples,
                        const Calibrators& heads, Calibrators* grad,
                        double gamma = kFocalGamma, double alpha = kFocalAlpha);

}  // namespace detectrack
