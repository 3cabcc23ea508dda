#pragma once

// Binary sidecars carrying per-detection embeddings and optional BEV feature
// maps. All integers are little-endian uint32, all values little-endian
// IEEE-754 float32.
//
// Embeddings (.emb):
//   "DTEM" | version | dim | count
//   count x { frame | detection_index | dim x float32 }
//
// Feature maps (.fmap):
//   "DTFM" | version | channels | count
//   count x { frame | view | X | Y | origin_x f64 | origin_y f64 | cell f64 |
//             channels*X*Y x float32 (row-major [C, X, Y]) }

#include "detectrack/numerics.hpp"
#include "detectrack/sfanet.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace detectrack {

inline constexpr std::uint32_t kSidecarVersion = 1;

struct EmbeddingRecord {
  std::uint32_t frame = 0;
  std::uint32_t detection_index = 0;
  Eigen::VectorXf values;
};

struct EmbeddingSidecar {
  std::uint32_t dim = 0;
  std::vector<EmbeddingRecord> records;
};

void write_embeddings(const std::string& path, const EmbeddingSidecar& sidecar);
EmbeddingSidecar read_embeddings(const std::string& path);

// Checks that every detection (frame f has detections_per_frame[f] entries)
// has exactly one embedding and nothing else is present.
void validate_embeddings(const EmbeddingSidecar& sidecar,
                         const std::vector<std::size_t>& detections_per_frame);

struct StoredFeatureMap {
  FeatureMap map;
  GridFrame grid;
};

void write_feature_maps(const std::string& path, const std::vector<StoredFeatureMap>& maps);
std::vector<StoredFeatureMap> read_feature_maps(const std::string& path);

}  // namespace detectrack
