#include "detectrack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace detectrack {

namespace {

enum Stream : std::uint64_t {
  kObjects = 1,
  kJitter = 2,
  kFeatures = 3,
  kClutter = 4,
  kShuffle = 5,
  kScores = 6,
  kMaps = 7,
};

// Values are rounded through float so they survive the float32 sidecar.
Eigen::VectorXd random_unit_scale(int dim, Rng& rng) {
  Eigen::VectorXd v(dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (int i = 0; i < dim; ++i) v(i) = rng.normal() * scale;
  return v;
}

Eigen::VectorXd to_float_precision(const Eigen::VectorXd& v) {
  return v.cast<float>().cast<double>();
}

double clamp_score(double s) { return std::clamp(s, 0.01, 0.99); }

void paint_footprint(Tensor3& map, const GridFrame& grid, const Box3D& box,
                     const Eigen::VectorXd& feature) {
  const BoxBEV bev = to_bev(box);
  const double c = std::cos(bev.yaw()), s = std::sin(bev.yaw());
  const auto nx = map.dimension(1), ny = map.dimension(2);
  for (Eigen::Index x = 0; x < nx; ++x) {
    const double px = grid.origin_x + (static_cast<double>(x) + 0.5) * grid.cell_size;
    if (std::abs(px - bev.center().x()) > bev.length() + bev.width()) continue;
    for (Eigen::Index y = 0; y < ny; ++y) {
      const double py = grid.origin_y + (static_cast<double>(y) + 0.5) * grid.cell_size;
      const double dx = px - bev.center().x(), dy = py - bev.center().y();
      const double lx = c * dx + s * dy, ly = -s * dx + c * dy;
      if (std::abs(lx) > bev.length() / 2 || std::abs(ly) > bev.width() / 2) continue;
      for (Eigen::Index ch = 0; ch < map.dimension(0); ++ch) map(ch, x, y) = feature(ch);
    }
  }
}

}  // namespace

SequenceBundle synth_scene(const SceneSpec& spec) {
  if (spec.objects < 0 || spec.frames < 1 || spec.feature_dim < 1 || !(spec.area > 20)) {
    throw std::invalid_argument("synth_scene: invalid scene spec");
  }
  if (spec.dropout < 0 || spec.dropout > 1 || spec.clutter < 0) {
    throw std::invalid_argument("synth_scene: dropout must be in [0,1] and clutter >= 0");
  }
  Rng obj_rng(spec.seed, kObjects), jit_rng(spec.seed, kJitter), feat_rng(spec.seed, kFeatures),
      clutter_rng(spec.seed, kClutter), shuffle_rng(spec.seed, kShuffle),
      score_rng(spec.seed, kScores), map_rng(spec.seed, kMaps);

  struct Object {
    Eigen::Vector2d start;
    Eigen::Vector2d velocity;
    Eigen::Vector3d dims;
    double yaw;
    Eigen::VectorXd identity;
  };
  const double margin = 10.0;
  std::vector<Object> objects;
  for (int i = 0; i < spec.objects; ++i) {
    Object o;
    // Rejection keeps initial footprints apart.
    for (int attempt = 0; attempt < 100; ++attempt) {
      o.start = {obj_rng.uniform(margin, spec.area - margin), obj_rng.uniform(margin, spec.area - margin)};
      const bool clear = std::none_of(objects.begin(), objects.end(), [&](const Object& other) {
        return (other.start - o.start).norm() < 6.0;
      });
      if (clear) break;
    }
    const double heading = obj_rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double speed = obj_rng.uniform(0.0, spec.max_speed);
    o.velocity = speed * Eigen::Vector2d(std::cos(heading), std::sin(heading));
    o.yaw = heading;
    o.dims = {obj_rng.uniform(3.5, 4.5), obj_rng.uniform(1.5, 2.0), obj_rng.uniform(1.4, 1.7)};
    o.identity = random_unit_scale(spec.feature_dim, feat_rng);
    objects.push_back(std::move(o));
  }

  SequenceBundle bundle;
  bundle.sequence_id = spec.sequence_id;
  bundle.feature_dim = spec.feature_dim;
  const auto cells = static_cast<Eigen::Index>(std::ceil(spec.area / spec.map_cell));
  const GridFrame grid{0.0, 0.0, spec.map_cell};

  for (int t = 0; t < spec.frames; ++t) {
    BundleFrame frame;
    frame.frame = t;
    std::vector<Candidate> candidates;
    for (int i = 0; i < spec.objects; ++i) {
      const Object& o = objects[static_cast<std::size_t>(i)];
      const Eigen::Vector2d p = o.start + static_cast<double>(t) * o.velocity;
      const Eigen::Vector3d center(p.x(), p.y(), o.dims.z() / 2);
      const Box3D gt_box(center, o.dims, o.yaw, 1.0, 0);
      frame.gt.push_back({i + 1, gt_box});

      const Eigen::VectorXd noise = random_unit_scale(spec.feature_dim, feat_rng);
      const Eigen::VectorXd feature = to_float_precision(o.identity + spec.feature_noise * noise);
      const double jx = spec.pos_noise * jit_rng.normal();
      const double jy = spec.pos_noise * jit_rng.normal();
      const double jyaw = spec.yaw_noise * jit_rng.normal();
      Eigen::Vector3d jdims = o.dims;
      for (int k = 0; k < 3; ++k) jdims(k) = std::max(0.1, jdims(k) + spec.dim_noise * jit_rng.normal());
      const double score =
          clamp_score(spec.true_score_mean + spec.score_spread * score_rng.normal());
      const bool dropped = jit_rng.uniform() < spec.dropout;
      if (dropped) continue;
      const Eigen::Vector3d jcenter(center.x() + jx, center.y() + jy, jdims.z() / 2);
      candidates.push_back({Box3D(jcenter, jdims, o.yaw + jyaw, score, 0), feature});
    }
    const int n_clutter = clutter_rng.poisson(spec.clutter);
    for (int k = 0; k < n_clutter; ++k) {
      const Eigen::Vector3d dims(clutter_rng.uniform(3.5, 4.5), clutter_rng.uniform(1.5, 2.0),
                                 clutter_rng.uniform(1.4, 1.7));
      const Eigen::Vector3d center(clutter_rng.uniform(margin, spec.area - margin),
                                   clutter_rng.uniform(margin, spec.area - margin), dims.z() / 2);
      const double yaw = clutter_rng.uniform(-std::numbers::pi, std::numbers::pi);
      const double score =
          clamp_score(spec.clutter_score_mean + spec.score_spread * clutter_rng.normal());
      candidates.push_back({Box3D(center, dims, yaw, score, 0),
                            to_float_precision(random_unit_scale(spec.feature_dim, clutter_rng))});
    }
    for (std::size_t k = candidates.size(); k > 1; --k) {
      const auto swap_with = static_cast<std::size_t>(shuffle_rng.below(k));
      std::swap(candidates[k - 1], candidates[swap_with]);
    }
    frame.candidates = std::move(candidates);

    if (spec.with_maps) {
      StoredFeatureMap stored;
      stored.grid = grid;
      stored.map.timestamp = t;
      stored.map.view = View::kBev;
      stored.map.tensor.resize(spec.feature_dim, cells, cells);
      for (Eigen::Index i = 0; i < stored.map.tensor.size(); ++i) {
        stored.map.tensor.data()[i] =
            static_cast<double>(static_cast<float>(0.01 * map_rng.normal()));
      }
      for (const auto& c : frame.candidates) paint_footprint(stored.map.tensor, grid, c.box, c.feature);
      frame.bev_map = std::move(stored);
    }
    bundle.frames.push_back(std::move(frame));
  }
  return bundle;
}

}  // namespace detectrack
