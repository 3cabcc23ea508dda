#pragma once

// A sequence of detector candidates, their embeddings, GT and optional BEV
// feature maps, plus its on-disk layout:
//
//   <dir>/meta.json   {"sequence_id", "frames", "feature_dim", "has_maps"}
//   <dir>/gt.txt      KITTI tracking labels
//   <dir>/det.txt     KITTI result lines (track_id -1, raw score appended)
//   <dir>/det.emb     embedding sidecar keyed by (frame, line order in frame)
//   <dir>/bev.fmap    feature-map sidecar (only when has_maps)

#include "detectrack/metrics.hpp"
#include "detectrack/sidecar.hpp"
#include "detectrack/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace detectrack {

struct BundleFrame {
  int frame = 0;
  std::vector<Candidate> candidates;
  std::vector<GtObject> gt;
  std::optional<StoredFeatureMap> bev_map;
};

struct SequenceBundle {
  std::string sequence_id = "0000";
  int feature_dim = 0;
  std::vector<BundleFrame> frames;

  bool has_maps() const;
  // Frame indices contiguous from 0, consistent feature dimensions.
  void validate() const;
};

void save_bundle(const SequenceBundle& bundle, const std::string& dir);
SequenceBundle load_bundle(const std::string& dir);

SequenceObjects gt_sequence(const SequenceBundle& bundle);

}  // namespace detectrack
