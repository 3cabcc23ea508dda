#include "detectrack/bundle.hpp"

#include "detectrack/kitti_io.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace detectrack {

namespace fs = std::filesystem;

bool SequenceBundle::has_maps() const {
  return !frames.empty() && frames.front().bev_map.has_value();
}

void SequenceBundle::validate() const {
  const bool maps = has_maps();
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& fr = frames[f];
    if (fr.frame != static_cast<int>(f)) {
      throw std::invalid_argument("bundle: frame indices must be contiguous from 0");
    }
    for (const auto& c : fr.candidates) {
      if (c.feature.size() != feature_dim) {
        throw std::invalid_argument("bundle: candidate feature dimension differs from " +
                                    std::to_string(feature_dim));
      }
    }
    if (fr.bev_map.has_value() != maps) {
      throw std::invalid_argument("bundle: feature maps present for some frames only");
    }
  }
}

void save_bundle(const SequenceBundle& bundle, const std::string& dir) {
  bundle.validate();
  fs::create_directories(dir);
  std::vector<KittiRecord> gt, det;
  EmbeddingSidecar emb;
  emb.dim = static_cast<std::uint32_t>(bundle.feature_dim);
  std::vector<StoredFeatureMap> maps;
  for (const auto& fr : bundle.frames) {
    for (const auto& g : fr.gt) gt.push_back(box_to_kitti(g.box, fr.frame, g.track_id, false));
    for (std::size_t j = 0; j < fr.candidates.size(); ++j) {
      det.push_back(box_to_kitti(fr.candidates[j].box, fr.frame, -1, true));
      emb.records.push_back({static_cast<std::uint32_t>(fr.frame), static_cast<std::uint32_t>(j),
                             fr.candidates[j].feature.cast<float>()});
    }
    if (fr.bev_map) maps.push_back(*fr.bev_map);
  }
  write_kitti_file((fs::path(dir) / "gt.txt").string(), gt);
  write_kitti_file((fs::path(dir) / "det.txt").string(), det);
  write_embeddings((fs::path(dir) / "det.emb").string(), emb);
  if (bundle.has_maps()) write_feature_maps((fs::path(dir) / "bev.fmap").string(), maps);

  nlohmann::json meta = {{"sequence_id", bundle.sequence_id},
                         {"frames", bundle.frames.size()},
                         {"feature_dim", bundle.feature_dim},
                         {"has_maps", bundle.has_maps()}};
  std::ofstream out(fs::path(dir) / "meta.json");
  out << meta.dump(2) << '\n';
}

SequenceBundle load_bundle(const std::string& dir) {
  const fs::path root(dir);
  std::ifstream meta_in(root / "meta.json");
  if (!meta_in) throw ParseError((root / "meta.json").string() + ": cannot open file");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError((root / "meta.json").string() + ": " + e.what());
  }
  SequenceBundle bundle;
  int num_frames = 0;
  bool has_maps = false;
  try {
    bundle.sequence_id = meta.at("sequence_id").get<std::string>();
    num_frames = meta.at("frames").get<int>();
    bundle.feature_dim = meta.at("feature_dim").get<int>();
    has_maps = meta.value("has_maps", false);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError((root / "meta.json").string() + ": " + e.what());
  }
  bundle.frames.resize(static_cast<std::size_t>(num_frames));
  for (int f = 0; f < num_frames; ++f) bundle.frames[static_cast<std::size_t>(f)].frame = f;

  auto load_boxes = [&](const fs::path& p) {
    auto records = parse_kitti_tracking_file(p.string());
    for (const auto& r : records) {
      if (r.frame >= num_frames) {
        throw ParseError(p.string() + ": frame " + std::to_string(r.frame) +
                         " beyond sequence length");
      }
    }
    return records;
  };
  auto to_box = [](const KittiRecord& r, const fs::path& p) {
    try {
      return kitti_to_box(r);
    } catch (const std::invalid_argument& e) {
      throw ParseError(p.string() + ": frame " + std::to_string(r.frame) + ": " + e.what());
    }
  };

  const fs::path gt_path = root / "gt.txt", det_path = root / "det.txt";
  for (const auto& r : load_boxes(gt_path)) {
    bundle.frames[static_cast<std::size_t>(r.frame)].gt.push_back({r.track_id, to_box(r, gt_path)});
  }
  std::vector<std::size_t> per_frame(static_cast<std::size_t>(num_frames), 0);
  for (const auto& r : load_boxes(det_path)) {
    if (!r.score) throw ParseError(det_path.string() + ": detection lines need a score");
    auto& fr = bundle.frames[static_cast<std::size_t>(r.frame)];
    fr.candidates.push_back({to_box(r, det_path), Eigen::VectorXd()});
    ++per_frame[static_cast<std::size_t>(r.frame)];
  }

  const EmbeddingSidecar emb = read_embeddings((root / "det.emb").string());
  if (static_cast<int>(emb.dim) != bundle.feature_dim) {
    throw ParseError((root / "det.emb").string() + ": dimension " + std::to_string(emb.dim) +
                     " does not match feature_dim " + std::to_string(bundle.feature_dim));
  }
  validate_embeddings(emb, per_frame);
  for (const auto& rec : emb.records) {
    bundle.frames[rec.frame].candidates[rec.detection_index].feature = rec.values.cast<double>();
  }

  if (has_maps) {
    auto maps = read_feature_maps((root / "bev.fmap").string());
    if (maps.size() != static_cast<std::size_t>(num_frames)) {
      throw ParseError((root / "bev.fmap").string() + ": expected one map per frame");
    }
    for (auto& m : maps) {
      const int f = m.map.timestamp;
      if (f < 0 || f >= num_frames) throw ParseError((root / "bev.fmap").string() + ": bad frame");
      bundle.frames[static_cast<std::size_t>(f)].bev_map = std::move(m);
    }
  }
  bundle.validate();
  return bundle;
}

SequenceObjects gt_sequence(const SequenceBundle& bundle) {
  SequenceObjects seq;
  for (const auto& fr : bundle.frames) {
    FrameObjects objs;
    for (const auto& g : fr.gt) objs.push_back({g.track_id, g.box});
    seq.push_back(std::move(objs));
  }
  return seq;
}

}  // namespace detectrack
