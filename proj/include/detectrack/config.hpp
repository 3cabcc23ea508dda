#pragma once

// Run configuration. JSON layout (every key optional, unknown keys rejected):
//
// {
//   "seed": 7,
//   "feature_source": "embedding" | "maps",
//   "pruning":     {"enabled": true, "spatial": 15.0, "temporal": 5.0},
//   "gnn":         {"iterations": 3, "dim": 64, "tied": false, "gating": true,
//                   "normalize": true, "identity_init": true,
//                   "head_hidden": [64, 64], "combine": "product",
//                   "attention_init": 5.0},
//   "tracker":     {"gate": 0.5, "max_age": 2, "score_threshold": 0.0},
//   "calibration": {"enabled": false, "hidden": [16]},
//   "sfanet":      {"depth": 1, "hidden": 8},
//   "metrics":     {"iou_threshold": 0.25, "class_thresholds": {"0": 0.25},
//                   "recall_steps": 40},
//   "train":       {"steps": 500, "learning_rate": 0.003, "optimizer": "adam",
//                   "schedule": "cosine", "calibration": true,
//                   "rotation_copies": 4},
//   "weights":     {"input": "", "output": ""}
// }
//
// A pruning threshold of null means unlimited.

#include "detectrack/metrics.hpp"
#include "detectrack/sggnn.hpp"
#include "detectrack/stgraph.hpp"
#include "detectrack/tracker.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace detectrack {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class FeatureSourceKind { kEmbedding, kMaps };
enum class OptimizerKind { kSgd, kAdam };
enum class Schedule { kConstant, kCosine };

struct CalibrationConfig {
  bool enabled = false;
  std::vector<int> hidden{16};
};

struct SfaNetConfig {
  int depth = 1;
  int hidden = 8;
};

struct TrainConfig {
  int steps = 500;
  double learning_rate = 0.003;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  Schedule schedule = Schedule::kCosine;  // cosine decays to 0 over `steps`
  bool calibration = true;  // also fit the calibrators when they are enabled
  // Each step trains on this many copies of every frame pair, each with the
  // embeddings rotated by an independent random orthogonal matrix; 0 trains
  // on the pairs as they are.
  int rotation_copies = 4;
};

struct RunConfig {
  std::uint64_t seed = 7;
  FeatureSourceKind feature_source = FeatureSourceKind::kEmbedding;
  bool pruning_enabled = true;
  PruningConfig pruning;
  GnnConfig gnn;
  LifecycleConfig lifecycle;
  double score_threshold = 0.0;
  CalibrationConfig calibration;
  SfaNetConfig sfanet;
  MetricsConfig metrics;
  TrainConfig train;
  std::string weights_input;
  std::string weights_output;

  // Pruning thresholds in effect (unlimited when pruning is disabled).
  PruningConfig effective_pruning() const;
  void validate() const;
};

// Throws ParseError for malformed JSON and ConfigError for schema violations.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);
std::string config_to_json(const RunConfig& cfg, int indent = 2);

}  // namespace detectrack
