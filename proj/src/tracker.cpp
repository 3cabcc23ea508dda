#include "detectrack/tracker.hpp"

#include "detectrack/hungarian.hpp"

#include <stdexcept>

namespace detectrack {

AssignmentResult solve_assignment(const Eigen::MatrixXd& affinity, double gate) {
  if (!affinity.allFinite()) {
    throw std::invalid_argument("solve_assignment: affinity must be finite");
  }
  const int nt = static_cast<int>(affinity.rows()), nd = static_cast<int>(affinity.cols());
  AssignmentResult out;
  std::vector<char> det_used(static_cast<std::size_t>(nd), 0);
  const std::vector<int> rows =
      hungarian_min_cost((1.0 - affinity.array()).matrix(), 1.0);
  for (int i = 0; i < nt; ++i) {
    const int j = rows.empty() ? -1 : rows[static_cast<std::size_t>(i)];
    if (j >= 0 && affinity(i, j) >= gate) {
      out.matches.push_back({i, j});
      det_used[static_cast<std::size_t>(j)] = 1;
    } else {
      out.unmatched_tracks.push_back(i);
    }
  }
  for (int j = 0; j < nd; ++j) {
    if (!det_used[static_cast<std::size_t>(j)]) out.unmatched_dets.push_back(j);
  }
  return out;
}

double assignment_score(const Eigen::MatrixXd& affinity, const std::vector<Match>& matches) {
  double total = 0;
  for (const auto& m : matches) total += affinity(m.track, m.det);
  return total;
}

Tracklet update_tracklet(const Tracklet& previous, const AssignmentResult& assignment,
                         const DetectionSet& detections, int& next_id,
                         const LifecycleConfig& cfg) {
  detections.validate();
  Tracklet next;
  next.frame = detections.frame;
  std::vector<int> det_for_track(previous.size(), -1);
  for (const auto& m : assignment.matches) {
    det_for_track[static_cast<std::size_t>(m.track)] = m.det;
  }
  for (std::size_t i = 0; i < previous.size(); ++i) {
    TrackletEntry entry = previous.entries[i];
    const int j = det_for_track[i];
    if (j >= 0) {
      entry.box = detections.boxes[static_cast<std::size_t>(j)];
      entry.feature = detections.features[static_cast<std::size_t>(j)];
      entry.feature.source = FeatureSource::kTracklet;
      entry.miss_count = 0;
    } else {
      ++entry.miss_count;
      if (entry.miss_count > cfg.max_age) continue;
    }
    ++entry.age;
    next.entries.push_back(std::move(entry));
  }
  for (int j : assignment.unmatched_dets) {
    InstanceFeature feature = detections.features[static_cast<std::size_t>(j)];
    feature.source = FeatureSource::kTracklet;
    next.entries.push_back({next_id++, detections.boxes[static_cast<std::size_t>(j)],
                            std::move(feature), 1, 0});
  }
  return next;
}

std::vector<int> assign_gt_ids(const std::vector<Box3D>& detections,
                               const std::vector<GtObject>& gt, double iou_threshold) {
  std::vector<int> ids(detections.size(), -1);
  std::vector<double> best_iou(detections.size(), 0.0);
  for (std::size_t j = 0; j < detections.size(); ++j) {
    int best = -1;
    double best_value = 0;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const double v = iou_3d(detections[j], gt[g].box);
      if (v > best_value) {
        best_value = v;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0 && best_value > iou_threshold) {
      ids[j] = gt[static_cast<std::size_t>(best)].track_id;
      best_iou[j] = best_value;
    }
  }
  // One detection per GT id.
  for (std::size_t j = 0; j < detections.size(); ++j) {
    if (ids[j] < 0) continue;
    for (std::size_t k = j + 1; k < detections.size(); ++k) {
      if (ids[k] != ids[j]) continue;
      if (best_iou[k] > best_iou[j]) {
        ids[j] = -1;
        break;
      }
      ids[k] = -1;
    }
  }
  return ids;
}

Eigen::MatrixXd gt_affinity(const std::vector<Box3D>& detections,
                            const std::vector<GtObject>& gt,
                            const std::vector<int>& track_ids, double iou_threshold) {
  const std::vector<int> ids = assign_gt_ids(detections, gt, iou_threshold);
  Eigen::MatrixXd target = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(track_ids.size()),
                                                 static_cast<Eigen::Index>(detections.size()));
  for (std::size_t i = 0; i < track_ids.size(); ++i) {
    for (std::size_t j = 0; j < ids.size(); ++j) {
      if (ids[j] >= 0 && ids[j] == track_ids[i]) {
        target(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
      }
    }
  }
  return target;
}

double tracking_loss(const Eigen::MatrixXd& affinity, const Eigen::MatrixXd& target,
                     Eigen::MatrixXd* grad) {
  if (affinity.rows() != target.rows() || affinity.cols() != target.cols()) {
    throw std::invalid_argument("tracking_loss: shape mismatch");
  }
  if (affinity.size() == 0) {
    if (grad != nullptr) grad->resize(affinity.rows(), affinity.cols());
    return 0;
  }
  const double n = static_cast<double>(affinity.size());
  const Eigen::MatrixXd diff = affinity - target;
  if (grad != nullptr) *grad = (2.0 / n) * diff;
  return diff.squaredNorm() / n;
}

}  // namespace detectrack
