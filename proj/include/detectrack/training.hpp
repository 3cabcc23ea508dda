#pragma once

// Teacher-forced training. For every frame t >= 1 the tracklet T_{t-1} is
// built from the candidates at t-1 that received a GT id, carrying the GT box
// and id; the target affinity comes from the GT ids of the candidates at t.
// Loss = mean over frame pairs of the affinity MSE, plus the calibration
// focal loss when enabled. Embedding coordinates carry no fixed meaning, so
// training can present each pair under random rotations of feature space.

#include "detectrack/pipeline.hpp"

#include <functional>

namespace detectrack {

struct TrainingPair {
  STGraph graph;  // pruned per the run configuration
  Eigen::MatrixXd target;
};

std::vector<TrainingPair> teacher_forced_pairs(const SequenceBundle& bundle,
                                               const ModelParams& model, const RunConfig& cfg);

// Candidates labelled by GT overlap, scored against the teacher-forced
// tracklet of the previous frame.
std::vector<CalibrationSample> calibration_samples(const SequenceBundle& bundle,
                                                   const ModelParams& model,
                                                   const RunConfig& cfg);

// Mean tracking loss over the pairs; gradients accumulate into `grad`.
double tracking_objective(const std::vector<TrainingPair>& pairs, const GnnParams& gnn,
                          GnnParams* grad = nullptr);

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate) : kind_(kind), lr_(learning_rate) {}

  void set_learning_rate(double lr) { lr_ = lr; }
  double learning_rate() const { return lr_; }

  // params -= update(grads); both lists must share one layout.
  void step(const ParamList& params, const ParamList& grads);

 private:
  OptimizerKind kind_;
  double lr_;
  long t_ = 0;
  Eigen::VectorXd m_, v_;
};

struct StepLoss {
  double total = 0;
  double tracking = 0;
  double calibration = 0;
};

struct TrainingSet {
  std::vector<TrainingPair> pairs;
  std::vector<CalibrationSample> samples;
};

TrainingSet make_training_set(const std::vector<SequenceBundle>& bundles,
                              const ModelParams& model, const RunConfig& cfg);

// Loss and gradient at the current parameters, without updating them.
StepLoss training_loss(const TrainingSet& data, const ModelParams& model, const RunConfig& cfg,
                       ModelParams* grad = nullptr);

// Haar-distributed random orthogonal matrix.
Eigen::MatrixXd random_rotation(int dim, Rng& rng);

// `copies` passes over `pairs`, each pair's node features rotated by its own
// random orthogonal matrix.
std::vector<TrainingPair> rotated_copies(const std::vector<TrainingPair>& pairs, int copies,
                                         Rng& rng);

// `copies` passes over `samples`; each pass rotates every feature and refined
// feature by one shared random orthogonal matrix.
std::vector<CalibrationSample> rotated_copies(const std::vector<CalibrationSample>& samples,
                                              int copies, Rng& rng);

// One full-batch gradient step. With `augment`, the gradient is taken on
// cfg.train.rotation_copies rotated copies of the pairs and the calibration
// samples. Returns the loss on
// the unrotated data before the update.
StepLoss train_step(const TrainingSet& data, ModelParams& model, Optimizer& opt,
                    const RunConfig& cfg, Rng* augment = nullptr);

using StepCallback = std::function<void(int step, const StepLoss&)>;

// Runs cfg.train.steps steps; the returned history holds the loss before each step.
std::vector<StepLoss> train(const std::vector<SequenceBundle>& bundles, ModelParams& model,
                            const RunConfig& cfg, const StepCallback& on_step = {});

}  // namespace detectrack
