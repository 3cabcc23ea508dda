#include "detectrack/pipeline.hpp"

#include <algorithm>

namespace detectrack {

namespace {

enum SeedStream : std::uint64_t { kGnnStream = 101, kCalibrationStream = 102, kSfaStream = 103 };

Eigen::VectorXd pooled_or_zero(const Tensor3& map, const BoxBEV& footprint,
                               const GridFrame& grid) {
  try {
    return global_avg_pool(roi_pool(map, footprint, grid));
  } catch (const std::out_of_range&) {
    return Eigen::VectorXd::Zero(map.dimension(0));
  }
}

}  // namespace

ModelParams ModelParams::create(const RunConfig& cfg, int feature_dim) {
  if (feature_dim != cfg.gnn.dim) {
    throw ConfigError("feature dimension " + std::to_string(feature_dim) +
                      " does not match gnn.dim " + std::to_string(cfg.gnn.dim));
  }
  Rng gnn_rng(cfg.seed, kGnnStream), cal_rng(cfg.seed, kCalibrationStream),
      sfa_rng(cfg.seed, kSfaStream);
  ModelParams m;
  m.gnn = GnnParams::random(cfg.gnn, gnn_rng);
  m.calibrators = Calibrators::random(feature_dim, cfg.calibration.hidden, cal_rng);
  m.sfanet = SfaNet::random(feature_dim, cfg.sfanet.depth, cfg.sfanet.hidden, sfa_rng);
  return m;
}

ModelParams ModelParams::zeros_like() const {
  return {gnn.zeros_like(), calibrators.zeros_like(), sfanet.zeros_like()};
}

void ModelParams::append_params(ParamList& out) {
  gnn.append_params(out, "gnn");
  calibrators.append_params(out, "calibration");
  sfanet.append_params(out, "sfanet");
}

CandidateFeatures FeatureExtractor::next(const BundleFrame& frame) {
  CandidateFeatures out;
  if (kind_ == FeatureSourceKind::kEmbedding) {
    for (const auto& c : frame.candidates) {
      out.feature.push_back(c.feature);
      out.refined.push_back(c.feature);
    }
    return out;
  }
  if (!frame.bev_map) {
    throw std::invalid_argument("frame " + std::to_string(frame.frame) +
                                ": map features requested but the bundle has no maps");
  }
  const GridFrame& grid = frame.bev_map->grid;
  const FeatureMap& raw = frame.bev_map->map;
  FeatureMap current = aggregate(raw, previous_raw_ ? &*previous_raw_ : nullptr, *net_);
  for (const auto& c : frame.candidates) {
    const BoxBEV footprint = to_bev(c.box);
    Eigen::VectorXd g = pooled_or_zero(current.tensor, footprint, grid);
    Eigen::VectorXd h = g;
    if (previous_aggregated_) {
      try {
        h = refine_from_maps(current.tensor, previous_aggregated_->tensor, footprint, grid);
      } catch (const std::out_of_range&) {
      }
    }
    out.feature.push_back(std::move(g));
    out.refined.push_back(std::move(h));
  }
  previous_raw_ = raw;
  previous_aggregated_ = std::move(current);
  return out;
}

OnlineTracker::OnlineTracker(const ModelParams& model, const RunConfig& cfg)
    : model_(&model), cfg_(cfg), features_(model.sfanet, cfg.feature_source) {
  cfg_.validate();
}

FrameResult OnlineTracker::step(const BundleFrame& frame) {
  FrameResult out;
  out.frame = frame.frame;
  const CandidateFeatures feats = features_.next(frame);
  out.detections.frame = frame.frame;
  for (std::size_t j = 0; j < frame.candidates.size(); ++j) {
    const Candidate& c = frame.candidates[j];
    CandidateScore s;
    s.raw = c.box.score();
    s.tracklet_iou = nearest_tracklet_iou(c.box, tracklet_);
    s.calibrated = s.raw;
    if (cfg_.calibration.enabled) {
      s.calibrated = calibrate_candidate(feats.feature[j], feats.refined[j], s.raw,
                                         s.tracklet_iou, model_->calibrators)
                         .classification;
    }
    s.kept = s.calibrated >= cfg_.score_threshold;
    if (s.kept) {
      out.detections.boxes.push_back(c.box.with_score(s.calibrated));
      out.detections.features.push_back(
          {feats.feature[j], FeatureSource::kDetection,
           static_cast<int>(out.detections.boxes.size()) - 1, frame.frame});
    }
    out.candidates.push_back(s);
  }

  out.graph = prune(build_graph(out.detections, tracklet_), cfg_.effective_pruning());
  out.affinity = gnn_forward(out.graph, model_->gnn, nullptr, &out.stats);
  out.assignment = solve_assignment(out.affinity, cfg_.lifecycle.gate);
  tracklet_ = update_tracklet(tracklet_, out.assignment, out.detections, next_id_, cfg_.lifecycle);
  tracklet_.frame = frame.frame;
  for (const auto& e : tracklet_.entries) {
    if (e.miss_count == 0) out.tracks.push_back({e.track_id, e.box});
  }
  return out;
}

TrackRun track_sequence(const SequenceBundle& bundle, const ModelParams& model,
                        const RunConfig& cfg, bool keep_frames) {
  bundle.validate();
  OnlineTracker tracker(model, cfg);
  TrackRun run;
  for (const auto& frame : bundle.frames) {
    FrameResult r = tracker.step(frame);
    run.tracks.push_back(r.tracks);
    if (keep_frames) run.frames.push_back(std::move(r));
  }
  return run;
}

std::vector<KittiRecord> tracks_to_records(const SequenceObjects& tracks) {
  std::vector<KittiRecord> out;
  for (std::size_t f = 0; f < tracks.size(); ++f) {
    FrameObjects sorted = tracks[f];
    std::sort(sorted.begin(), sorted.end(),
              [](const TrackedObject& a, const TrackedObject& b) { return a.track_id < b.track_id; });
    for (const auto& t : sorted) out.push_back(box_to_kitti(t.box, static_cast<int>(f), t.track_id, true));
  }
  return out;
}

}  // namespace detectrack
