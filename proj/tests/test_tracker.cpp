#include "detectrack/hungarian.hpp"
#include "detectrack/tracker.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <limits>
#include <set>

using namespace detectrack;
using detectrack::testing::brute_force_best;
using detectrack::testing::make_box;
using detectrack::testing::random_box;

namespace {

Eigen::MatrixXd random_affinity(int nt, int nd, Rng& rng) {
  return Eigen::MatrixXd::NullaryExpr(nt, nd, [&] { return rng.uniform(); });
}

DetectionSet detections_at(const std::vector<double>& xs, int frame) {
  DetectionSet d;
  d.frame = frame;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    d.boxes.push_back(make_box(xs[i], 0, 0, 4, 2, 1.5));
    d.features.push_back({Eigen::VectorXd::Constant(2, xs[i]), FeatureSource::kDetection,
                          static_cast<int>(i), frame});
  }
  return d;
}

std::vector<int> ids_of(const Tracklet& t) {
  std::vector<int> ids;
  for (const auto& e : t.entries) ids.push_back(e.track_id);
  return ids;
}

std::vector<int> misses_of(const Tracklet& t) {
  std::vector<int> m;
  for (const auto& e : t.entries) m.push_back(e.miss_count);
  return m;
}

}  // namespace

TEST(Hungarian, SquareAndRectangularMatchBruteForce) {
  Rng rng(1);
  for (int nt = 1; nt <= 6; ++nt) {
    for (int nd = 1; nd <= 6; ++nd) {
      for (int trial = 0; trial < 20; ++trial) {
        const Eigen::MatrixXd a = random_affinity(nt, nd, rng);
        const AssignmentResult r = solve_assignment(a, 0.0);
        EXPECT_EQ(r.matches.size(), static_cast<std::size_t>(std::min(nt, nd)));
        EXPECT_EQ(assignment_score(a, r.matches), brute_force_best(a));
      }
    }
  }
}

TEST(Hungarian, SevenBySeven) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd a = random_affinity(7, 7, rng);
    EXPECT_EQ(assignment_score(a, solve_assignment(a, 0.0).matches), brute_force_best(a));
  }
}

TEST(Hungarian, SquareSolverRejectsBadInput) {
  EXPECT_THROW(hungarian_square(Eigen::MatrixXd::Zero(2, 3)), std::invalid_argument);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
  bad(0, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(hungarian_square(bad), std::invalid_argument);
  EXPECT_TRUE(hungarian_square(Eigen::MatrixXd(0, 0)).empty());
}

TEST(Assignment, DominantDiagonal) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Constant(3, 3, 0.1);
  a.diagonal().setConstant(0.9);
  const AssignmentResult r = solve_assignment(a, 0.5);
  const std::vector<Match> expected{{0, 0}, {1, 1}, {2, 2}};
  EXPECT_EQ(r.matches, expected);
  EXPECT_TRUE(r.unmatched_tracks.empty());
  EXPECT_TRUE(r.unmatched_dets.empty());
}

TEST(Assignment, AllBelowGate) {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Constant(3, 4, 0.3);
  const AssignmentResult r = solve_assignment(a, 0.5);
  EXPECT_TRUE(r.matches.empty());
  EXPECT_EQ(r.unmatched_tracks, (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(r.unmatched_dets, (std::vector<int>{0, 1, 2, 3}));
}

TEST(Assignment, EmptySides) {
  EXPECT_TRUE(solve_assignment(Eigen::MatrixXd(0, 3), 0.5).matches.empty());
  EXPECT_EQ(solve_assignment(Eigen::MatrixXd(0, 3), 0.5).unmatched_dets.size(), 3u);
  EXPECT_EQ(solve_assignment(Eigen::MatrixXd(2, 0), 0.5).unmatched_tracks.size(), 2u);
}

TEST(Assignment, OutputIsPartialMatching) {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const int nt = 1 + trial % 7, nd = 1 + (trial / 7) % 7;
    const AssignmentResult r = solve_assignment(random_affinity(nt, nd, rng), 0.4);
    std::set<int> tracks, dets;
    for (const auto& m : r.matches) {
      EXPECT_TRUE(tracks.insert(m.track).second);
      EXPECT_TRUE(dets.insert(m.det).second);
    }
    for (int t : r.unmatched_tracks) EXPECT_TRUE(tracks.insert(t).second);
    for (int d : r.unmatched_dets) EXPECT_TRUE(dets.insert(d).second);
    EXPECT_EQ(tracks.size(), static_cast<std::size_t>(nt));
    EXPECT_EQ(dets.size(), static_cast<std::size_t>(nd));
  }
}

TEST(Assignment, TiesBreakTowardLowestIndex) {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Constant(2, 2, 0.8);
  const std::vector<Match> expected{{0, 0}, {1, 1}};
  EXPECT_EQ(solve_assignment(a, 0.5).matches, expected);
}

TEST(Lifecycle, PerfectMatchKeepsIds) {
  int next_id = 1;
  const LifecycleConfig cfg;
  Tracklet t = update_tracklet(Tracklet{}, solve_assignment(Eigen::MatrixXd(0, 3), 0.5),
                               detections_at({0, 10, 20}, 0), next_id, cfg);
  EXPECT_EQ(ids_of(t), (std::vector<int>{1, 2, 3}));
  for (int f = 1; f < 4; ++f) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Constant(3, 3, 0.05);
    a.diagonal().setConstant(0.95);
    t = update_tracklet(t, solve_assignment(a, 0.5), detections_at({0.5 * f, 10, 20}, f), next_id,
                        cfg);
    EXPECT_EQ(ids_of(t), (std::vector<int>{1, 2, 3}));
    EXPECT_EQ(t.entries[0].age, f + 1);
    EXPECT_EQ(t.entries[0].box.center().x(), 0.5 * f);
    EXPECT_EQ(t.entries[0].feature.source, FeatureSource::kTracklet);
  }
  EXPECT_EQ(next_id, 4);
}

TEST(Lifecycle, EmptyFramesDecay) {
  int next_id = 1;
  LifecycleConfig cfg;
  cfg.max_age = 2;
  Tracklet t = update_tracklet(Tracklet{}, solve_assignment(Eigen::MatrixXd(0, 2), 0.5),
                               detections_at({0, 10}, 0), next_id, cfg);
  const auto frozen = t.entries[1].feature.vector;
  for (int f = 1; f <= 2; ++f) {
    t = update_tracklet(t, solve_assignment(Eigen::MatrixXd(2, 0), 0.5), detections_at({}, f),
                        next_id, cfg);
    ASSERT_EQ(t.size(), 2u);
    EXPECT_EQ(t.entries[0].miss_count, f);
    EXPECT_EQ(t.entries[1].feature.vector, frozen);
  }
  t = update_tracklet(t, solve_assignment(Eigen::MatrixXd(2, 0), 0.5), detections_at({}, 3),
                      next_id, cfg);
  EXPECT_TRUE(t.empty());
}

TEST(Lifecycle, HandTracedFiveFrameScenario) {
  int next_id = 1;
  const LifecycleConfig cfg{0.5, 2};
  Tracklet t;
  std::vector<std::vector<int>> id_history, miss_history;

  // Frame 0: two births.
  t = update_tracklet(t, solve_assignment(Eigen::MatrixXd(0, 2), 0.5), detections_at({0, 10}, 0),
                      next_id, cfg);
  id_history.push_back(ids_of(t));
  miss_history.push_back(misses_of(t));

  // Frame 1: the two tracks swap detection order and a third object appears.
  Eigen::MatrixXd a1(2, 3);
  a1 << 0.1, 0.9, 0.2,
        0.8, 0.1, 0.3;
  t = update_tracklet(t, solve_assignment(a1, 0.5), detections_at({10, 0, 30}, 1), next_id, cfg);
  id_history.push_back(ids_of(t));
  miss_history.push_back(misses_of(t));

  // Frame 2: only object 3 is seen.
  Eigen::MatrixXd a2(3, 1);
  a2 << 0.2, 0.1, 0.95;
  t = update_tracklet(t, solve_assignment(a2, 0.5), detections_at({30}, 2), next_id, cfg);
  id_history.push_back(ids_of(t));
  miss_history.push_back(misses_of(t));

  // Frame 3: nothing detected.
  t = update_tracklet(t, solve_assignment(Eigen::MatrixXd(3, 0), 0.5), detections_at({}, 3),
                      next_id, cfg);
  id_history.push_back(ids_of(t));
  miss_history.push_back(misses_of(t));

  // Frame 4: object 1 returns, track 2 expires, a weak match to track 3 is gated off.
  Eigen::MatrixXd a4(3, 2);
  a4 << 0.1, 0.9,
        0.2, 0.1,
        0.45, 0.0;
  t = update_tracklet(t, solve_assignment(a4, 0.5), detections_at({50, 0}, 4), next_id, cfg);
  id_history.push_back(ids_of(t));
  miss_history.push_back(misses_of(t));

  const std::vector<std::vector<int>> expected_ids{
      {1, 2}, {1, 2, 3}, {1, 2, 3}, {1, 2, 3}, {1, 3, 4}};
  const std::vector<std::vector<int>> expected_misses{
      {0, 0}, {0, 0, 0}, {1, 1, 0}, {2, 2, 1}, {0, 2, 0}};
  EXPECT_EQ(id_history, expected_ids);
  EXPECT_EQ(miss_history, expected_misses);
  EXPECT_EQ(t.entries[0].box.center().x(), 0.0);
  EXPECT_EQ(t.entries[2].box.center().x(), 50.0);
  EXPECT_EQ(next_id, 5);
}

TEST(Lifecycle, IdsUniqueAndNeverReused) {
  Rng rng(4);
  int next_id = 1;
  const LifecycleConfig cfg{0.5, 1};
  Tracklet t;
  std::set<int> ever;
  int last_next = next_id;
  for (int f = 0; f < 60; ++f) {
    std::vector<double> xs;
    for (int k = 0; k < static_cast<int>(rng.below(5)); ++k) xs.push_back(rng.uniform(0, 100));
    const DetectionSet d = detections_at(xs, f);
    const Eigen::MatrixXd a = random_affinity(static_cast<int>(t.size()), static_cast<int>(xs.size()), rng);
    const std::vector<int> prior = ids_of(t);
    const std::set<int> before(prior.begin(), prior.end());
    t = update_tracklet(t, solve_assignment(a, 0.5), d, next_id, cfg);
    std::set<int> now;
    for (const auto& e : t.entries) {
      EXPECT_TRUE(now.insert(e.track_id).second);
      if (!before.count(e.track_id)) {
        EXPECT_TRUE(ever.insert(e.track_id).second);
      }
      EXPECT_GE(e.age, 1);
      EXPECT_GE(e.miss_count, 0);
    }
    for (int id : before) ever.insert(id);
    EXPECT_GE(next_id, last_next);
    last_next = next_id;
  }
}

TEST(GtAffinity, IdenticalDetectionMarksCell) {
  const Box3D g1 = make_box(0, 0, 0.8, 4, 2, 1.6), g2 = make_box(10, 0, 0.8, 4, 2, 1.6);
  const std::vector<GtObject> gt{{7, g1}, {9, g2}};
  const Eigen::MatrixXd a = gt_affinity({g2, g1}, gt, {9, 7, 4});
  Eigen::MatrixXd expected(3, 2);
  expected << 1, 0,
              0, 1,
              0, 0;
  EXPECT_EQ(a, expected);
}

TEST(GtAffinity, LowOverlapGivesEmptyColumn) {
  const Box3D g = make_box(0, 0, 0, 4, 2, 2);
  // Half-length shift: IoU 1/3.
  const Box3D d = make_box(2.0, 0, 0, 4, 2, 2);
  ASSERT_LT(iou_3d(d, g), 0.5);
  const Eigen::MatrixXd a = gt_affinity({d}, {{3, g}}, {3});
  EXPECT_EQ(a(0, 0), 0.0);
  const Box3D far = make_box(2.8, 0, 0, 4, 2, 2);
  EXPECT_NEAR(iou_3d(far, g), 1.2 / 6.8, 1e-12);
}

TEST(GtAffinity, MatchesNaiveConstruction) {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<GtObject> gt;
    for (int k = 0; k < 1 + trial % 5; ++k) gt.push_back({k + 1, random_box(rng, 4)});
    std::vector<Box3D> dets;
    for (const auto& g : gt) {
      if (rng.uniform() < 0.8) {
        const Eigen::Vector3d c = g.box.center() + Eigen::Vector3d(rng.normal(), rng.normal(), 0) * 0.4;
        dets.push_back(Box3D(c, g.box.dims(), g.box.yaw() + 0.1 * rng.normal()));
      }
    }
    if (rng.uniform() < 0.5) dets.push_back(random_box(rng, 4));
    std::vector<int> track_ids{1, 2, 3, 6};

    // Best GT per detection, then one detection per GT id.
    std::vector<int> id(dets.size(), -1);
    std::vector<double> best(dets.size(), 0);
    for (std::size_t j = 0; j < dets.size(); ++j) {
      for (const auto& g : gt) {
        const double v = iou_3d(dets[j], g.box);
        if (v > best[j]) {
          best[j] = v;
          id[j] = g.track_id;
        }
      }
      if (best[j] <= 0.5) id[j] = -1;
    }
    for (std::size_t j = 0; j < dets.size(); ++j) {
      for (std::size_t k = 0; k < dets.size(); ++k) {
        if (k == j || id[j] < 0 || id[k] != id[j]) continue;
        if (best[k] > best[j] || (best[k] == best[j] && k < j)) id[j] = -2;
      }
    }
    Eigen::MatrixXd naive = Eigen::MatrixXd::Zero(4, static_cast<Eigen::Index>(dets.size()));
    for (std::size_t i = 0; i < track_ids.size(); ++i)
      for (std::size_t j = 0; j < dets.size(); ++j)
        if (id[j] > 0 && id[j] == track_ids[i]) naive(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1;

    const Eigen::MatrixXd a = gt_affinity(dets, gt, track_ids);
    EXPECT_EQ(a, naive);
    for (Eigen::Index i = 0; i < a.rows(); ++i) EXPECT_LE(a.row(i).sum(), 1.0);
    for (Eigen::Index j = 0; j < a.cols(); ++j) EXPECT_LE(a.col(j).sum(), 1.0);
  }
}

TEST(TrackingLoss, Examples) {
  Rng rng(6);
  const Eigen::MatrixXd a = random_affinity(3, 4, rng);
  EXPECT_EQ(tracking_loss(a, a), 0.0);
  EXPECT_EQ(tracking_loss(Eigen::MatrixXd::Constant(1, 1, 0.5), Eigen::MatrixXd::Ones(1, 1)), 0.25);
  EXPECT_EQ(tracking_loss(Eigen::MatrixXd(0, 3), Eigen::MatrixXd(0, 3)), 0.0);
  EXPECT_THROW(tracking_loss(a, Eigen::MatrixXd::Zero(4, 3)), std::invalid_argument);
}

TEST(TrackingLoss, MatchesDirectSumAndGradient) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const int nt = 1 + trial % 5, nd = 1 + trial % 4;
    const Eigen::MatrixXd a = random_affinity(nt, nd, rng), t = random_affinity(nt, nd, rng);
    double direct = 0;
    for (int i = 0; i < nt; ++i)
      for (int j = 0; j < nd; ++j) direct += (a(i, j) - t(i, j)) * (a(i, j) - t(i, j));
    direct /= nt * nd;
    Eigen::MatrixXd g;
    const double v = tracking_loss(a, t, &g);
    EXPECT_NEAR(v, direct, 1e-12);
    EXPECT_GT(v, 0.0);
    const Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(a.data(), a.size());
    const auto r = grad_check(
        [&](const Eigen::VectorXd& x) {
          return tracking_loss(Eigen::Map<const Eigen::MatrixXd>(x.data(), nt, nd), t);
        },
        x0, Eigen::Map<const Eigen::VectorXd>(g.data(), g.size()));
    EXPECT_LT(r.max_rel_error, 1e-6);
  }
}
