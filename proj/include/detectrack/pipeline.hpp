#pragma once

// Per-frame tracking loop: candidate features, tracklet-aware calibration,
// score filtering, graph construction and pruning, message passing,
// assignment and tracklet update.

#include "detectrack/bundle.hpp"
#include "detectrack/config.hpp"
#include "detectrack/kitti_io.hpp"
#include "detectrack/sfanet.hpp"
#include "detectrack/sggnn.hpp"
#include "detectrack/tracker.hpp"
#include "detectrack/trkdet.hpp"

#include <optional>
#include <vector>

namespace detectrack {

struct ModelParams {
  GnnParams gnn;
  Calibrators calibrators;
  SfaNet sfanet;  // BEV stream

  // Throws ConfigError when feature_dim differs from the GNN width.
  static ModelParams create(const RunConfig& cfg, int feature_dim);
  ModelParams zeros_like() const;
  // Blocks are prefixed "gnn", "calibration" and "sfanet".
  void append_params(ParamList& out);
};

struct CandidateFeatures {
  std::vector<Eigen::VectorXd> feature;  // node / proposal-stage feature
  std::vector<Eigen::VectorXd> refined;  // refinement-stage feature
};

// Embedding source: the sidecar vectors. Map source: the SFANet-aggregated BEV
// map pooled over each footprint; consecutive calls carry the previous map.
class FeatureExtractor {
 public:
  FeatureExtractor(const SfaNet& net, FeatureSourceKind kind) : net_(&net), kind_(kind) {}
  CandidateFeatures next(const BundleFrame& frame);

 private:
  const SfaNet* net_;
  FeatureSourceKind kind_;
  std::optional<FeatureMap> previous_raw_;
  std::optional<FeatureMap> previous_aggregated_;
};

struct CandidateScore {
  double raw = 0;
  double calibrated = 0;
  double tracklet_iou = 0;
  bool kept = false;
};

struct FrameResult {
  int frame = 0;
  std::vector<CandidateScore> candidates;
  DetectionSet detections;
  STGraph graph;
  Eigen::MatrixXd affinity;
  AssignmentResult assignment;
  MessagePassStats stats;
  FrameObjects tracks;  // tracks updated by a detection in this frame
};

class OnlineTracker {
 public:
  OnlineTracker(const ModelParams& model, const RunConfig& cfg);

  FrameResult step(const BundleFrame& frame);
  const Tracklet& tracklet() const { return tracklet_; }

 private:
  const ModelParams* model_;
  RunConfig cfg_;
  FeatureExtractor features_;
  Tracklet tracklet_;
  int next_id_ = 1;
};

struct TrackRun {
  SequenceObjects tracks;
  std::vector<FrameResult> frames;  // filled when requested
};

TrackRun track_sequence(const SequenceBundle& bundle, const ModelParams& model,
                        const RunConfig& cfg, bool keep_frames = false);

// KITTI result lines ordered by frame, then track id.
std::vector<KittiRecord> tracks_to_records(const SequenceObjects& tracks);

}  // namespace detectrack
