#pragma once

#include "detectrack/geometry.hpp"

#include <Eigen/Core>

#include <stdexcept>
#include <vector>

namespace detectrack {

enum class FeatureSource { kDetection, kTracklet };

struct InstanceFeature {
  Eigen::VectorXd vector;
  FeatureSource source = FeatureSource::kDetection;
  int object_index = 0;
  int timestamp = 0;
};

// Detections of one frame; boxes[i] and features[i] describe the same object.
struct DetectionSet {
  std::vector<Box3D> boxes;
  std::vector<InstanceFeature> features;
  int frame = 0;

  std::size_t size() const { return boxes.size(); }
  bool empty() const { return boxes.empty(); }
  void validate() const {
    if (boxes.size() != features.size()) {
      throw std::invalid_argument("DetectionSet: boxes and features are not aligned");
    }
  }
};

struct TrackletEntry {
  int track_id = 0;
  Box3D box;
  InstanceFeature feature;
  int age = 1;
  int miss_count = 0;
};

// Tracker state T_{t-1}.
struct Tracklet {
  std::vector<TrackletEntry> entries;
  int frame = -1;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

struct GtObject {
  int track_id = 0;
  Box3D box;
};

// A raw detector candidate as delivered by files or the generator.
struct Candidate {
  Box3D box;  // box.score() is the raw detector score
  Eigen::VectorXd feature;
};

}  // namespace detectrack
