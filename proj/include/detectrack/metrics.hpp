#pragma once

// CLEAR MOT metrics and the recall-integrated AMOTA / sAMOTA / AMOTP family.
//
// Per frame, predictions and GT of the same class are matched by Hungarian
// assignment on 3D IoU, keeping only pairs with IoU >= the class threshold.
// An identity switch is counted when a GT id is matched to a prediction id
// different from the one it was last matched to.
//
// Recall integration over L sample points r_k = k / L (k = 1..L):
//   1. Match all predictions once; collect the confidences of matched
//      predictions, sorted descending.
//   2. The confidence threshold for r_k is the n_k-th matched confidence,
//      n_k = ceil(r_k * num_gt). When fewer matches exist the point is
//      unreachable and contributes 0 to every average.
//   3. Re-evaluate the sequence keeping predictions with score >= threshold:
//        MOTA_k  = 1 - (FP + FN + IDSW) / num_gt
//        sMOTA_k = clamp(1 - (FP + FN + IDSW - (1 - r_k) num_gt) / (r_k num_gt), 0, 1)
//        MOTP_k  = mean IoU over matches
//   4. AMOTA = mean_k max(0, MOTA_k), sAMOTA = mean_k sMOTA_k,
//      AMOTP = mean_k MOTP_k.

#include "detectrack/geometry.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace detectrack {

struct TrackedObject {
  int track_id = 0;
  Box3D box;  // box.score() is the confidence
};

using FrameObjects = std::vector<TrackedObject>;
// One entry per frame, frames aligned between predictions and GT.
using SequenceObjects = std::vector<FrameObjects>;

struct FrameEval {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long idsw = 0;
  long gt = 0;
  double iou_sum = 0;

  FrameEval& operator+=(const FrameEval& o);
};

struct MetricsConfig {
  double iou_threshold = 0.25;
  std::map<int, double> class_thresholds;  // class_id -> IoU threshold
  int recall_steps = 40;

  double threshold_for(int class_id) const;
};

class MetricsUndefined : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Stateful CLEAR accumulator for one sequence (keeps the last matched
// prediction id per GT id).
class ClearAccumulator {
 public:
  explicit ClearAccumulator(MetricsConfig cfg = {}) : cfg_(std::move(cfg)) {}

  FrameEval add_frame(const FrameObjects& predictions, const FrameObjects& gt);
  const FrameEval& totals() const { return totals_; }
  // Confidences of matched predictions seen so far.
  const std::vector<double>& matched_scores() const { return matched_scores_; }

 private:
  MetricsConfig cfg_;
  FrameEval totals_;
  std::map<int, int> last_match_;
  std::vector<double> matched_scores_;
};

FrameEval match_frame(const FrameObjects& predictions, const FrameObjects& gt,
                      double iou_threshold);

double mota(const FrameEval& totals);
double motp(const FrameEval& totals);

struct RecallPoint {
  double recall = 0;
  bool reachable = false;
  double threshold = 0;
  double mota = 0;
  double smota = 0;
  double motp = 0;
};

struct MetricReport {
  double mota = 0;
  double motp = 0;
  double samota = 0;
  double amota = 0;
  double amotp = 0;
  FrameEval totals;
  std::vector<RecallPoint> curve;
};

FrameEval evaluate_clear(const std::vector<SequenceObjects>& predictions,
                         const std::vector<SequenceObjects>& gt,
                         const MetricsConfig& cfg = {},
                         double min_score = -1.0,
                         std::vector<double>* matched_scores = nullptr);

// Throws MetricsUndefined when the GT holds no objects.
MetricReport evaluate(const std::vector<SequenceObjects>& predictions,
                      const std::vector<SequenceObjects>& gt, const MetricsConfig& cfg = {});
MetricReport evaluate(const SequenceObjects& predictions, const SequenceObjects& gt,
                      const MetricsConfig& cfg = {});

std::string report_to_json(const MetricReport& report, int indent = 2);
std::string report_to_table(const MetricReport& report);
std::string curve_to_csv(const MetricReport& report);

}  // namespace detectrack
