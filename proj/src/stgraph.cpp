#include "detectrack/stgraph.hpp"

#include <json.hpp>

#include <algorithm>
#include <stdexcept>

namespace detectrack {

void PruningConfig::validate() const {
  if (!(spatial > 0) || !(temporal > 0)) {
    throw std::invalid_argument("PruningConfig: thresholds must be strictly positive");
  }
}

std::size_t STGraph::active_edge_count() const {
  return static_cast<std::size_t>(
      std::count_if(edges.begin(), edges.end(), [](const GraphEdge& e) { return e.active; }));
}

STGraph build_graph(const DetectionSet& detections, const Tracklet& tracklet) {
  detections.validate();
  STGraph g;
  g.num_detections = static_cast<int>(detections.size());
  g.num_tracks = static_cast<int>(tracklet.size());
  g.nodes.reserve(detections.size() + tracklet.size());
  for (std::size_t i = 0; i < detections.size(); ++i) {
    g.nodes.push_back({detections.features[i], detections.boxes[i], NodeTime::kCurrent});
  }
  for (const auto& entry : tracklet.entries) {
    g.nodes.push_back({entry.feature, entry.box, NodeTime::kPrevious});
  }

  const int nd = g.num_detections, nt = g.num_tracks;
  g.edges.reserve(static_cast<std::size_t>(nd * (nd - 1) + nt * (nt - 1) + 2 * nd * nt));
  for (int i = 0; i < nd; ++i) {
    for (int j = 0; j < nd; ++j) {
      if (i != j) g.edges.push_back({i, j, EdgeKind::kSpatialCurrent, true});
    }
  }
  for (int i = 0; i < nt; ++i) {
    for (int j = 0; j < nt; ++j) {
      if (i != j) g.edges.push_back({nd + i, nd + j, EdgeKind::kSpatialPrevious, true});
    }
  }
  for (int i = 0; i < nd; ++i) {
    for (int k = 0; k < nt; ++k) {
      g.edges.push_back({nd + k, i, EdgeKind::kTemporal, true});
      g.edges.push_back({i, nd + k, EdgeKind::kTemporal, true});
    }
  }
  return g;
}

STGraph prune(STGraph graph, const PruningConfig& cfg) {
  cfg.validate();
  for (auto& e : graph.edges) {
    if (!e.active) continue;
    const double limit = e.kind == EdgeKind::kTemporal ? cfg.temporal : cfg.spatial;
    const double d = center_distance_bev(graph.nodes[e.src].box, graph.nodes[e.dst].box);
    if (d > limit) e.active = false;
  }
  return graph;
}

std::string edge_kind_name(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::kSpatialCurrent:
      return "spatial_t";
    case EdgeKind::kSpatialPrevious:
      return "spatial_prev";
    case EdgeKind::kTemporal:
      return "temporal";
  }
  return "unknown";
}

std::string graph_to_json(const STGraph& graph, int indent) {
  nlohmann::json doc;
  doc["num_detections"] = graph.num_detections;
  doc["num_tracks"] = graph.num_tracks;
  auto& nodes = doc["nodes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto& n = graph.nodes[i];
    nodes.push_back({{"index", i},
                     {"time", n.time == NodeTime::kCurrent ? "t" : "t-1"},
                     {"object_index", n.feature.object_index},
                     {"center", {n.box.center().x(), n.box.center().y(), n.box.center().z()}}});
  }
  auto& edges = doc["edges"] = nlohmann::json::array();
  for (const auto& e : graph.edges) {
    edges.push_back({{"src", e.src}, {"dst", e.dst}, {"kind", edge_kind_name(e.kind)},
                     {"active", e.active}});
  }
  doc["active_edges"] = graph.active_edge_count();
  return doc.dump(indent);
}

}  // namespace detectrack
