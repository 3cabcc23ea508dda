#include "detectrack/config.hpp"

#include "detectrack/kitti_io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace detectrack {

using nlohmann::json;

namespace {

class Section {
 public:
  Section(const json& j, std::string path, std::set<std::string> allowed)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    for (const auto& [key, _] : j_.items()) {
      if (!allowed.count(key)) throw ConfigError(path_ + ": unknown key '" + key + "'");
    }
  }

  template <typename T>
  void read(const std::string& key, T& out) const {
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  // null -> infinity
  void read_limit(const std::string& key, double& out) const {
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      out = std::numeric_limits<double>::infinity();
      return;
    }
    read(key, out);
  }

  const json* child(const std::string& key) const {
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  std::string path(const std::string& key) const { return path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
};

json limit_to_json(double v) { return std::isinf(v) ? json(nullptr) : json(v); }

}  // namespace

PruningConfig RunConfig::effective_pruning() const {
  return pruning_enabled ? pruning : PruningConfig::unlimited();
}

void RunConfig::validate() const {
  try {
    pruning.validate();
    gnn.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(lifecycle.gate >= 0 && lifecycle.gate <= 1)) throw ConfigError("tracker.gate must be in [0, 1]");
  if (lifecycle.max_age < 0) throw ConfigError("tracker.max_age must be >= 0");
  if (!(score_threshold >= 0 && score_threshold <= 1)) {
    throw ConfigError("tracker.score_threshold must be in [0, 1]");
  }
  for (int h : calibration.hidden) {
    if (h < 1) throw ConfigError("calibration.hidden widths must be positive");
  }
  if (sfanet.depth < 1 || sfanet.hidden < 1) throw ConfigError("sfanet depth and hidden must be >= 1");
  if (!(metrics.iou_threshold > 0 && metrics.iou_threshold <= 1)) {
    throw ConfigError("metrics.iou_threshold must be in (0, 1]");
  }
  for (const auto& [cls, t] : metrics.class_thresholds) {
    if (!(t > 0 && t <= 1)) throw ConfigError("metrics.class_thresholds must be in (0, 1]");
  }
  if (metrics.recall_steps < 1) throw ConfigError("metrics.recall_steps must be >= 1");
  if (train.steps < 0) throw ConfigError("train.steps must be >= 0");
  if (train.rotation_copies < 0) throw ConfigError("train.rotation_copies must be >= 0");
  if (!(train.learning_rate >= 0) || !std::isfinite(train.learning_rate)) {
    throw ConfigError("train.learning_rate must be finite and >= 0");
  }
}

RunConfig parse_config(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(source + ": " + e.what());
  }
  RunConfig cfg;
  const Section top(root, source,
                    {"seed", "feature_source", "pruning", "gnn", "tracker", "calibration",
                     "sfanet", "metrics", "train", "weights"});
  top.read("seed", cfg.seed);
  std::string feature_source = "embedding";
  top.read("feature_source", feature_source);
  if (feature_source == "embedding") {
    cfg.feature_source = FeatureSourceKind::kEmbedding;
  } else if (feature_source == "maps") {
    cfg.feature_source = FeatureSourceKind::kMaps;
  } else {
    throw ConfigError(top.path("feature_source") + ": expected \"embedding\" or \"maps\"");
  }

  if (const json* j = top.child("pruning")) {
    const Section s(*j, top.path("pruning"), {"enabled", "spatial", "temporal"});
    s.read("enabled", cfg.pruning_enabled);
    s.read_limit("spatial", cfg.pruning.spatial);
    s.read_limit("temporal", cfg.pruning.temporal);
  }
  if (const json* j = top.child("gnn")) {
    const Section s(*j, top.path("gnn"), {"iterations", "dim", "tied", "gating", "normalize",
                                          "identity_init", "head_hidden",
                                          "combine", "attention_init"});
    s.read("iterations", cfg.gnn.iterations);
    s.read("dim", cfg.gnn.dim);
    s.read("tied", cfg.gnn.tied);
    s.read("gating", cfg.gnn.gating);
    s.read("normalize", cfg.gnn.normalize);
    s.read("identity_init", cfg.gnn.identity_init);
    s.read("head_hidden", cfg.gnn.head_hidden);
    s.read("attention_init", cfg.gnn.attention_init);
    std::string combine = "product";
    s.read("combine", combine);
    if (combine == "product") {
      cfg.gnn.combine = Combine::kProduct;
    } else if (combine == "concat") {
      cfg.gnn.combine = Combine::kConcat;
    } else {
      throw ConfigError(s.path("combine") + ": expected \"product\" or \"concat\"");
    }
  }
  if (const json* j = top.child("tracker")) {
    const Section s(*j, top.path("tracker"), {"gate", "max_age", "score_threshold"});
    s.read("gate", cfg.lifecycle.gate);
    s.read("max_age", cfg.lifecycle.max_age);
    s.read("score_threshold", cfg.score_threshold);
  }
  if (const json* j = top.child("calibration")) {
    const Section s(*j, top.path("calibration"), {"enabled", "hidden"});
    s.read("enabled", cfg.calibration.enabled);
    s.read("hidden", cfg.calibration.hidden);
  }
  if (const json* j = top.child("sfanet")) {
    const Section s(*j, top.path("sfanet"), {"depth", "hidden"});
    s.read("depth", cfg.sfanet.depth);
    s.read("hidden", cfg.sfanet.hidden);
  }
  if (const json* j = top.child("metrics")) {
    const Section s(*j, top.path("metrics"), {"iou_threshold", "class_thresholds", "recall_steps"});
    s.read("iou_threshold", cfg.metrics.iou_threshold);
    s.read("recall_steps", cfg.metrics.recall_steps);
    std::map<std::string, double> per_class;
    s.read("class_thresholds", per_class);
    for (const auto& [key, value] : per_class) {
      int cls = 0;
      try {
        std::size_t used = 0;
        cls = std::stoi(key, &used);
        if (used != key.size()) throw std::invalid_argument(key);
      } catch (const std::exception&) {
        throw ConfigError(s.path("class_thresholds") + ": key '" + key + "' is not a class id");
      }
      cfg.metrics.class_thresholds[cls] = value;
    }
  }
  if (const json* j = top.child("train")) {
    const Section s(*j, top.path("train"), {"steps", "learning_rate", "optimizer", "schedule",
                                           "calibration", "rotation_copies"});
    s.read("steps", cfg.train.steps);
    s.read("learning_rate", cfg.train.learning_rate);
    s.read("calibration", cfg.train.calibration);
    s.read("rotation_copies", cfg.train.rotation_copies);
    std::string schedule = "cosine";
    s.read("schedule", schedule);
    if (schedule == "cosine") {
      cfg.train.schedule = Schedule::kCosine;
    } else if (schedule == "constant") {
      cfg.train.schedule = Schedule::kConstant;
    } else {
      throw ConfigError(s.path("schedule") + ": expected \"cosine\" or \"constant\"");
    }
    std::string opt = "adam";
    s.read("optimizer", opt);
    if (opt == "adam") {
      cfg.train.optimizer = OptimizerKind::kAdam;
    } else if (opt == "sgd") {
      cfg.train.optimizer = OptimizerKind::kSgd;
    } else {
      throw ConfigError(s.path("optimizer") + ": expected \"adam\" or \"sgd\"");
    }
  }
  if (const json* j = top.child("weights")) {
    const Section s(*j, top.path("weights"), {"input", "output"});
    s.read("input", cfg.weights_input);
    s.read("output", cfg.weights_output);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string config_to_json(const RunConfig& cfg, int indent) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["feature_source"] = cfg.feature_source == FeatureSourceKind::kMaps ? "maps" : "embedding";
  j["pruning"] = {{"enabled", cfg.pruning_enabled},
                  {"spatial", limit_to_json(cfg.pruning.spatial)},
                  {"temporal", limit_to_json(cfg.pruning.temporal)}};
  j["gnn"] = {{"iterations", cfg.gnn.iterations},
              {"dim", cfg.gnn.dim},
              {"tied", cfg.gnn.tied},
              {"gating", cfg.gnn.gating},
              {"normalize", cfg.gnn.normalize},
              {"identity_init", cfg.gnn.identity_init},
              {"head_hidden", cfg.gnn.head_hidden},
              {"combine", cfg.gnn.combine == Combine::kConcat ? "concat" : "product"},
              {"attention_init", cfg.gnn.attention_init}};
  j["tracker"] = {{"gate", cfg.lifecycle.gate},
                  {"max_age", cfg.lifecycle.max_age},
                  {"score_threshold", cfg.score_threshold}};
  j["calibration"] = {{"enabled", cfg.calibration.enabled}, {"hidden", cfg.calibration.hidden}};
  j["sfanet"] = {{"depth", cfg.sfanet.depth}, {"hidden", cfg.sfanet.hidden}};
  nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
  for (const auto& [cls, t] : cfg.metrics.class_thresholds) per_class[std::to_string(cls)] = t;
  j["metrics"] = {{"iou_threshold", cfg.metrics.iou_threshold},
                  {"class_thresholds", per_class},
                  {"recall_steps", cfg.metrics.recall_steps}};
  j["train"] = {{"steps", cfg.train.steps},
                {"learning_rate", cfg.train.learning_rate},
                {"optimizer", cfg.train.optimizer == OptimizerKind::kSgd ? "sgd" : "adam"},
                {"schedule", cfg.train.schedule == Schedule::kConstant ? "constant" : "cosine"},
                {"calibration", cfg.train.calibration},
                {"rotation_copies", cfg.train.rotation_copies}};
  j["weights"] = {{"input", cfg.weights_input}, {"output", cfg.weights_output}};
  return j.dump(indent);
}

}  // namespace detectrack
