#pragma once

// Per-frame association: affinity, assignment, tracklet lifecycle, and the
// ground-truth affinity and MSE loss used for training.

#include "detectrack/sggnn.hpp"
#include "detectrack/stgraph.hpp"
#include "detectrack/types.hpp"

#include <vector>

namespace detectrack {

struct Match {
  int track = 0;
  int det = 0;
  bool operator==(const Match&) const = default;
};

struct AssignmentResult {
  std::vector<Match> matches;  // sorted by track index
  std::vector<int> unmatched_tracks;
  std::vector<int> unmatched_dets;
};

// Maximizes the summed affinity via min-cost matching on 1 - A (dummy cost 1
// for padding), then drops matches whose affinity is below `gate`.
AssignmentResult solve_assignment(const Eigen::MatrixXd& affinity, double gate);

// Sum of affinities over the matched pairs, in track order.
double assignment_score(const Eigen::MatrixXd& affinity, const std::vector<Match>& matches);

struct LifecycleConfig {
  double gate = 0.5;
  int max_age = 2;  // tracks are dropped once miss_count exceeds this
};

// Matched tracks take the detection's box and feature; unmatched detections
// open new ids drawn from `next_id`; unmatched tracks keep their last box and
// feature and age out.
Tracklet update_tracklet(const Tracklet& previous, const AssignmentResult& assignment,
                         const DetectionSet& detections, int& next_id,
                         const LifecycleConfig& cfg);

// GT id per detection: the id of the highest-3D-IoU GT box when that IoU
// exceeds `iou_threshold`, else -1. When several detections claim one id only
// the best-overlapping (lowest index on ties) keeps it.
std::vector<int> assign_gt_ids(const std::vector<Box3D>& detections,
                               const std::vector<GtObject>& gt, double iou_threshold = 0.5);

// A_gt[i][j] = 1 iff tracklet id i equals the GT id assigned to detection j.
Eigen::MatrixXd gt_affinity(const std::vector<Box3D>& detections,
                            const std::vector<GtObject>& gt,
                            const std::vector<int>& track_ids, double iou_threshold = 0.5);

// Mean squared error over all N_T x N_D cells; 0 for an empty matrix.
double tracking_loss(const Eigen::MatrixXd& affinity, const Eigen::MatrixXd& target,
                     Eigen::MatrixXd* grad = nullptr);

}  // namespace detectrack
