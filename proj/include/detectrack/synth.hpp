#pragma once

// Seeded synthetic scenes: constant-velocity boxes on the ground plane,
// detections = GT + jitter with dropout and Poisson clutter, and per-object
// embeddings = fixed identity vector + noise.

#include "detectrack/bundle.hpp"

#include <cstdint>
#include <string>

namespace detectrack {

struct SceneSpec {
  int objects = 6;
  int frames = 5;
  double area = 60.0;        // square side, meters
  double max_speed = 1.5;    // meters per frame
  double pos_noise = 0.1;    // meters, std-dev of center jitter
  double yaw_noise = 0.02;   // radians
  double dim_noise = 0.02;   // meters
  double feature_noise = 0.3;  // relative to the unit-scale identity vector
  double dropout = 0.0;      // probability a GT object is not detected
  double clutter = 0.0;      // expected false candidates per frame
  double true_score_mean = 0.7;
  double clutter_score_mean = 0.35;
  double score_spread = 0.15;
  int feature_dim = 64;
  bool with_maps = false;
  double map_cell = 1.0;
  std::uint64_t seed = 1;
  std::string sequence_id = "synth";
};

SequenceBundle synth_scene(const SceneSpec& spec);

}  // namespace detectrack
