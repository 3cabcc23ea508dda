#include "detectrack/training.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace detectrack {

namespace {

constexpr double kGtIou = 0.5;

Tracklet teacher_tracklet(const BundleFrame& frame, const std::vector<Eigen::VectorXd>& features) {
  Tracklet t;
  t.frame = frame.frame;
  std::vector<Box3D> boxes;
  for (const auto& c : frame.candidates) boxes.push_back(c.box);
  const std::vector<int> ids = assign_gt_ids(boxes, frame.gt, kGtIou);
  for (std::size_t j = 0; j < ids.size(); ++j) {
    if (ids[j] < 0) continue;
    const auto gt = std::find_if(frame.gt.begin(), frame.gt.end(),
                                 [&](const GtObject& g) { return g.track_id == ids[j]; });
    t.entries.push_back({ids[j], gt->box,
                         {features[j], FeatureSource::kTracklet,
                          static_cast<int>(t.entries.size()), frame.frame},
                         1, 0});
  }
  return t;
}

DetectionSet all_candidates(const BundleFrame& frame, const std::vector<Eigen::VectorXd>& features) {
  DetectionSet d;
  d.frame = frame.frame;
  for (std::size_t j = 0; j < frame.candidates.size(); ++j) {
    d.boxes.push_back(frame.candidates[j].box);
    d.features.push_back({features[j], FeatureSource::kDetection, static_cast<int>(j), frame.frame});
  }
  return d;
}

std::vector<CandidateFeatures> all_features(const SequenceBundle& bundle, const ModelParams& model,
                                            const RunConfig& cfg) {
  FeatureExtractor extractor(model.sfanet, cfg.feature_source);
  std::vector<CandidateFeatures> out;
  for (const auto& frame : bundle.frames) out.push_back(extractor.next(frame));
  return out;
}

constexpr std::uint64_t kAugmentStream = 201;

}  // namespace

Eigen::MatrixXd random_rotation(int dim, Rng& rng) {
  Eigen::MatrixXd z(dim, dim);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = rng.normal();
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int c = 0; c < dim; ++c) {
    if (r(c, c) < 0) q.col(c) = -q.col(c);
  }
  return q;
}

std::vector<TrainingPair> rotated_copies(const std::vector<TrainingPair>& pairs, int copies,
                                         Rng& rng) {
  std::vector<TrainingPair> out;
  out.reserve(pairs.size() * static_cast<std::size_t>(copies));
  for (int c = 0; c < copies; ++c) {
    for (const auto& p : pairs) {
      TrainingPair r = p;
      if (!r.graph.nodes.empty()) {
        const Eigen::MatrixXd q =
            random_rotation(static_cast<int>(r.graph.nodes.front().feature.vector.size()), rng);
        for (auto& node : r.graph.nodes) node.feature.vector = q * node.feature.vector;
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<CalibrationSample> rotated_copies(const std::vector<CalibrationSample>& samples,
                                              int copies, Rng& rng) {
  std::vector<CalibrationSample> out;
  if (samples.empty()) return out;
  out.reserve(samples.size() * static_cast<std::size_t>(copies));
  const int dim = static_cast<int>(samples.front().feature.size());
  for (int c = 0; c < copies; ++c) {
    const Eigen::MatrixXd q = random_rotation(dim, rng);
    for (const auto& s : samples) {
      CalibrationSample r = s;
      r.feature = q * s.feature;
      r.refined = q * s.refined;
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<TrainingPair> teacher_forced_pairs(const SequenceBundle& bundle,
                                               const ModelParams& model, const RunConfig& cfg) {
  bundle.validate();
  const auto feats = all_features(bundle, model, cfg);
  std::vector<TrainingPair> pairs;
  for (std::size_t t = 1; t < bundle.frames.size(); ++t) {
    const Tracklet prev = teacher_tracklet(bundle.frames[t - 1], feats[t - 1].feature);
    const DetectionSet dets = all_candidates(bundle.frames[t], feats[t].feature);
    if (prev.empty() || dets.empty()) continue;
    std::vector<int> track_ids;
    for (const auto& e : prev.entries) track_ids.push_back(e.track_id);
    TrainingPair p;
    p.graph = prune(build_graph(dets, prev), cfg.effective_pruning());
    p.target = gt_affinity(dets.boxes, bundle.frames[t].gt, track_ids, kGtIou);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<CalibrationSample> calibration_samples(const SequenceBundle& bundle,
                                                   const ModelParams& model,
                                                   const RunConfig& cfg) {
  bundle.validate();
  const auto feats = all_features(bundle, model, cfg);
  std::vector<CalibrationSample> out;
  for (std::size_t t = 0; t < bundle.frames.size(); ++t) {
    const BundleFrame& frame = bundle.frames[t];
    const Tracklet prev = t == 0 ? Tracklet{} : teacher_tracklet(bundle.frames[t - 1], feats[t - 1].feature);
    std::vector<Box3D> boxes;
    for (const auto& c : frame.candidates) boxes.push_back(c.box);
    const std::vector<int> ids = assign_gt_ids(boxes, frame.gt, kGtIou);
    for (std::size_t j = 0; j < frame.candidates.size(); ++j) {
      out.push_back({feats[t].feature[j], feats[t].refined[j], frame.candidates[j].box.score(),
                     nearest_tracklet_iou(frame.candidates[j].box, prev), ids[j] >= 0 ? 1 : 0});
    }
  }
  return out;
}

double tracking_objective(const std::vector<TrainingPair>& pairs, const GnnParams& gnn,
                          GnnParams* grad) {
  if (pairs.empty()) return 0;
  const double scale = 1.0 / static_cast<double>(pairs.size());
  double total = 0;
  for (const auto& p : pairs) {
    GnnTrace trace;
    const Eigen::MatrixXd a = gnn_forward(p.graph, gnn, grad != nullptr ? &trace : nullptr);
    Eigen::MatrixXd g;
    total += scale * tracking_loss(a, p.target, grad != nullptr ? &g : nullptr);
    if (grad != nullptr) gnn_backward(p.graph, gnn, trace, scale * g, *grad);
  }
  return total;
}

void Optimizer::step(const ParamList& params, const ParamList& grads) {
  const Eigen::VectorXd g = flatten(grads);
  Eigen::VectorXd x = flatten(params);
  if (g.size() != x.size()) throw std::invalid_argument("Optimizer: gradient layout mismatch");
  if (kind_ == OptimizerKind::kSgd) {
    assign(params, x - lr_ * g);
    return;
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  if (m_.size() != x.size()) {
    m_ = Eigen::VectorXd::Zero(x.size());
    v_ = Eigen::VectorXd::Zero(x.size());
  }
  ++t_;
  m_ = beta1 * m_ + (1 - beta1) * g;
  v_ = beta2 * v_ + (1 - beta2) * g.cwiseAbs2();
  const double c1 = 1 - std::pow(beta1, static_cast<double>(t_));
  const double c2 = 1 - std::pow(beta2, static_cast<double>(t_));
  x.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
  assign(params, x);
}

TrainingSet make_training_set(const std::vector<SequenceBundle>& bundles,
                              const ModelParams& model, const RunConfig& cfg) {
  TrainingSet data;
  for (const auto& b : bundles) {
    auto pairs = teacher_forced_pairs(b, model, cfg);
    data.pairs.insert(data.pairs.end(), std::make_move_iterator(pairs.begin()),
                      std::make_move_iterator(pairs.end()));
    if (cfg.calibration.enabled && cfg.train.calibration) {
      auto samples = calibration_samples(b, model, cfg);
      data.samples.insert(data.samples.end(), samples.begin(), samples.end());
    }
  }
  return data;
}

StepLoss training_loss(const TrainingSet& data, const ModelParams& model, const RunConfig& cfg,
                       ModelParams* grad) {
  StepLoss loss;
  loss.tracking = tracking_objective(data.pairs, model.gnn, grad != nullptr ? &grad->gnn : nullptr);
  if (cfg.calibration.enabled && cfg.train.calibration) {
    loss.calibration = calibration_loss(data.samples, model.calibrators,
                                        grad != nullptr ? &grad->calibrators : nullptr);
  }
  loss.total = loss.tracking + loss.calibration;
  return loss;
}

StepLoss train_step(const TrainingSet& data, ModelParams& model, Optimizer& opt,
                    const RunConfig& cfg, Rng* augment) {
  ModelParams grad = model.zeros_like();
  StepLoss loss;
  if (augment != nullptr && cfg.train.rotation_copies > 0) {
    TrainingSet rotated{rotated_copies(data.pairs, cfg.train.rotation_copies, *augment),
                        rotated_copies(data.samples, cfg.train.rotation_copies, *augment)};
    training_loss(rotated, model, cfg, &grad);
    loss = training_loss(data, model, cfg);
  } else {
    loss = training_loss(data, model, cfg, &grad);
  }
  ParamList params, grads;
  model.append_params(params);
  grad.append_params(grads);
  opt.step(params, grads);
  return loss;
}

std::vector<StepLoss> train(const std::vector<SequenceBundle>& bundles, ModelParams& model,
                            const RunConfig& cfg, const StepCallback& on_step) {
  const TrainingSet data = make_training_set(bundles, model, cfg);
  Optimizer opt(cfg.train.optimizer, cfg.train.learning_rate);
  Rng augment(cfg.seed, kAugmentStream);
  std::vector<StepLoss> history;
  for (int s = 0; s < cfg.train.steps; ++s) {
    if (cfg.train.schedule == Schedule::kCosine) {
      const double progress = static_cast<double>(s) / cfg.train.steps;
      opt.set_learning_rate(cfg.train.learning_rate * 0.5 *
                            (1 + std::cos(std::numbers::pi * progress)));
    }
    history.push_back(train_step(data, model, opt, cfg, &augment));
    if (on_step) on_step(s, history.back());
  }
  return history;
}

}  // namespace detectrack
