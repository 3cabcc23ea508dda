#pragma once

// Shared fixtures for the unit tests: random boxes, scenes and graphs.

#include "detectrack/geometry.hpp"
#include "detectrack/numerics.hpp"
#include "detectrack/stgraph.hpp"
#include "detectrack/types.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>
#include <vector>

namespace detectrack::testing {

inline Box3D make_box(double x, double y, double z, double l, double w, double h,
                      double yaw = 0.0, double score = 1.0, int class_id = 0) {
  return Box3D(Eigen::Vector3d(x, y, z), Eigen::Vector3d(l, w, h), yaw, score, class_id);
}

inline BoxBEV random_bev(Rng& rng, double spread = 3.0) {
  return BoxBEV(Eigen::Vector2d(rng.uniform(-spread, spread), rng.uniform(-spread, spread)),
                rng.uniform(0.5, 5.0), rng.uniform(0.5, 3.0),
                rng.uniform(-std::numbers::pi, std::numbers::pi));
}

inline Box3D random_box(Rng& rng, double spread = 3.0) {
  return make_box(rng.uniform(-spread, spread), rng.uniform(-spread, spread),
                  rng.uniform(-0.5, 0.5), rng.uniform(0.5, 5.0), rng.uniform(0.5, 3.0),
                  rng.uniform(0.5, 2.0), rng.uniform(-std::numbers::pi, std::numbers::pi));
}

inline Eigen::VectorXd random_vector(int dim, Rng& rng) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.normal();
  return v;
}

inline Tensor3 random_tensor(Eigen::Index c, Eigen::Index x, Eigen::Index y, Rng& rng) {
  Tensor3 t(c, x, y);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
  return t;
}

inline DetectionSet random_detections(int n, int dim, double area, Rng& rng, int frame = 1) {
  DetectionSet d;
  d.frame = frame;
  for (int i = 0; i < n; ++i) {
    d.boxes.push_back(make_box(rng.uniform(0, area), rng.uniform(0, area), 0.8, 4.0, 1.8, 1.6,
                               rng.uniform(-3, 3)));
    d.features.push_back({random_vector(dim, rng), FeatureSource::kDetection, i, frame});
  }
  return d;
}

inline Tracklet random_tracklet(int n, int dim, double area, Rng& rng, int frame = 0) {
  Tracklet t;
  t.frame = frame;
  for (int i = 0; i < n; ++i) {
    const Box3D box = make_box(rng.uniform(0, area), rng.uniform(0, area), 0.8, 4.0, 1.8, 1.6,
                               rng.uniform(-3, 3));
    t.entries.push_back(
        {i + 1, box, {random_vector(dim, rng), FeatureSource::kTracklet, i, frame}, 1, 0});
  }
  return t;
}

// Best total affinity over all partial matchings of full size min(rows, cols),
// summed in row order.
inline double brute_force_best(const Eigen::MatrixXd& a) {
  const Eigen::Index nt = a.rows(), nd = a.cols();
  if (nt == 0 || nd == 0) return 0;
  const bool rows_small = nt <= nd;
  std::vector<int> perm(static_cast<std::size_t>(rows_small ? nd : nt));
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1;
  do {
    double total = 0;
    if (rows_small) {
      for (Eigen::Index i = 0; i < nt; ++i) total += a(i, perm[static_cast<std::size_t>(i)]);
    } else {
      std::vector<int> det_of(static_cast<std::size_t>(nt), -1);
      for (Eigen::Index j = 0; j < nd; ++j) det_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])] = static_cast<int>(j);
      for (Eigen::Index i = 0; i < nt; ++i) {
        if (det_of[static_cast<std::size_t>(i)] >= 0) total += a(i, det_of[static_cast<std::size_t>(i)]);
      }
    }
    best = std::max(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace detectrack::testing
