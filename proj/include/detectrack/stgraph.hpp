#pragma once

// Spatio-temporal graph over the detections at t and the tracklet at t-1.
// Nodes [0, N_D) are detections, [N_D, N_D + N_T) tracklet entries. Every
// ordered pair of distinct nodes is an edge; pruning flips `active` off
// instead of deleting, so full and pruned graphs share one structure.

#include "detectrack/types.hpp"

#include <limits>
#include <string>
#include <vector>

namespace detectrack {

enum class NodeTime { kCurrent, kPrevious };
enum class EdgeKind { kSpatialCurrent, kSpatialPrevious, kTemporal };

struct GraphNode {
  InstanceFeature feature;
  Box3D box;
  NodeTime time = NodeTime::kCurrent;
};

struct GraphEdge {
  int src = 0;
  int dst = 0;
  EdgeKind kind = EdgeKind::kTemporal;
  bool active = true;

  bool operator==(const GraphEdge&) const = default;
};

struct PruningConfig {
  double spatial = 15.0;  // meters, same-frame edges
  double temporal = 5.0;  // meters, cross-frame edges

  static PruningConfig unlimited() {
    return {std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
  }
  void validate() const;
};

struct STGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  int num_detections = 0;
  int num_tracks = 0;

  std::size_t active_edge_count() const;
  int track_node(int i) const { return num_detections + i; }
};

STGraph build_graph(const DetectionSet& detections, const Tracklet& tracklet);

// Deactivates same-frame edges longer than cfg.spatial and cross-frame edges
// longer than cfg.temporal (BEV center distance). Never re-activates.
STGraph prune(STGraph graph, const PruningConfig& cfg);

std::string edge_kind_name(EdgeKind kind);
std::string graph_to_json(const STGraph& graph, int indent = 2);

}  // namespace detectrack
