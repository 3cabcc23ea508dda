#include "detectrack/sggnn.hpp"
#include "detectrack/tracker.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace detectrack;
using detectrack::testing::make_box;
using detectrack::testing::random_detections;
using detectrack::testing::random_tracklet;
using detectrack::testing::random_vector;

namespace {

GnnConfig small_config(int dim = 6, int iterations = 2) {
  GnnConfig cfg;
  cfg.dim = dim;
  cfg.iterations = iterations;
  cfg.head_hidden = {5, 4};
  return cfg;
}

STGraph random_graph(int nd, int nt, int dim, Rng& rng, double area = 20) {
  return build_graph(random_detections(nd, dim, area, rng), random_tracklet(nt, dim, area, rng));
}

double direct_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm());
}

double mlp_by_hand(const Mlp& head, const Eigen::VectorXd& x) {
  const auto& L = head.layers();
  const Eigen::VectorXd h1 = (L[0].weight * x + L[0].bias).cwiseMax(0.0);
  const Eigen::VectorXd h2 = (L[1].weight * h1 + L[1].bias).cwiseMax(0.0);
  return 1.0 / (1.0 + std::exp(-(L[2].weight * h2 + L[2].bias)(0)));
}

double loss_of(const STGraph& g, const GnnParams& p, const Eigen::MatrixXd& target) {
  return tracking_loss(gnn_forward(g, p), target);
}

double check_gradients(const STGraph& g, GnnParams& params, const Eigen::MatrixXd& target) {
  GnnTrace trace;
  const Eigen::MatrixXd a = gnn_forward(g, params, &trace);
  Eigen::MatrixXd ga;
  tracking_loss(a, target, &ga);
  GnnParams grad = params.zeros_like();
  gnn_backward(g, params, trace, ga, grad);
  ParamList plist, glist;
  params.append_params(plist, "gnn");
  grad.append_params(glist, "gnn");
  const Eigen::VectorXd p0 = flatten(plist);
  const auto r = grad_check(
      [&](const Eigen::VectorXd& p) {
        assign(plist, p);
        return loss_of(g, params, target);
      },
      p0, flatten(glist));
  assign(plist, p0);
  return r.max_rel_error;
}

Eigen::MatrixXd diagonal_target(int nt, int nd) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(nt, nd);
  for (int i = 0; i < std::min(nt, nd); ++i) t(i, i) = 1;
  return t;
}

}  // namespace

TEST(Attention, SingleSourceAndZeroTemperature) {
  Rng rng(1);
  const Eigen::VectorXd target = random_vector(5, rng);
  const std::vector<Eigen::VectorXd> one{random_vector(5, rng)};
  EXPECT_EQ(attention_weights(target, one, 3.0)(0), 1.0);
  std::vector<Eigen::VectorXd> many;
  for (int k = 0; k < 4; ++k) many.push_back(random_vector(5, rng));
  const Eigen::VectorXd a = attention_weights(target, many, 0.0);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(a(k), 0.25, 1e-15);
}

TEST(Attention, MatchesDirectSoftmax) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::VectorXd target = random_vector(7, rng);
    std::vector<Eigen::VectorXd> sources;
    for (int k = 0; k < 3; ++k) sources.push_back(random_vector(7, rng));
    const double w = rng.uniform(-5, 5);
    double e[3], sum = 0;
    for (int k = 0; k < 3; ++k) sum += e[k] = std::exp(w * direct_cosine(sources[k], target));
    const Eigen::VectorXd a = attention_weights(target, sources, w);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(a(k), e[k] / sum, 1e-12);
    EXPECT_NEAR(a.sum(), 1.0, 1e-12);
    sources[1] *= rng.uniform(0.01, 100);
    EXPECT_LT((attention_weights(target, sources, w) - a).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Attention, ZeroNormRejected) {
  Rng rng(3);
  const std::vector<Eigen::VectorXd> sources{random_vector(3, rng), Eigen::VectorXd::Zero(3)};
  EXPECT_THROW(attention_weights(random_vector(3, rng), sources, 1.0), std::domain_error);
  const std::vector<Eigen::VectorXd> ok{random_vector(3, rng)};
  EXPECT_THROW(attention_weights(Eigen::VectorXd::Zero(3), ok, 1.0), std::domain_error);
  EXPECT_THROW(attention_weights(random_vector(3, rng), {}, 1.0), std::invalid_argument);
}

TEST(MessagePass, AllEdgesPrunedEvolvesThroughSelfWeights) {
  Rng rng(4);
  GnnConfig cfg = small_config(4, 3);
  const GnnParams p = GnnParams::random(cfg, rng);
  STGraph g = random_graph(3, 2, 4, rng);
  for (auto& e : g.edges) e.active = false;
  const Eigen::MatrixXd f0 = node_features(g);
  Eigen::MatrixXd expect = f0;
  for (int k = 0; k < 3; ++k) expect = (p.layer(k).w_self * expect).cwiseMax(0.0);
  MessagePassStats stats;
  EXPECT_LT((message_pass(g, f0, p, &stats) - expect).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(stats.edge_computations, 0u);
}

TEST(MessagePass, IdentityUpdateKeepsNonNegativeFeatures) {
  Rng rng(5);
  GnnConfig cfg = small_config(4, 1);
  GnnParams p = GnnParams::random(cfg, rng);
  p.layers[0].w_self.setIdentity();
  p.layers[0].w_msg.setZero();
  const STGraph g = random_graph(3, 3, 4, rng);
  const Eigen::MatrixXd f0 = node_features(g).cwiseAbs();
  EXPECT_EQ(message_pass(g, f0, p), f0);
}

TEST(MessagePass, ZeroIterationsRejected) {
  Rng rng(6);
  GnnConfig cfg = small_config();
  cfg.iterations = 0;
  EXPECT_THROW(GnnParams::random(cfg, rng), std::invalid_argument);
  cfg = small_config();
  cfg.head_hidden = {4};
  EXPECT_THROW(GnnParams::random(cfg, rng), std::invalid_argument);
}

TEST(MessagePass, LineGraphMatchesHandUnrolled) {
  Rng rng(7);
  const int dim = 3;
  GnnConfig cfg = small_config(dim, 2);
  const GnnParams p = GnnParams::random(cfg, rng);
  STGraph g;
  g.num_detections = 4;
  for (int i = 0; i < 4; ++i) {
    g.nodes.push_back({{random_vector(dim, rng).cwiseAbs()}, make_box(i, 0, 0, 1, 1, 1),
                       NodeTime::kCurrent});
  }
  for (int i = 0; i + 1 < 4; ++i) {
    g.edges.push_back({i, i + 1, EdgeKind::kSpatialCurrent, true});
    g.edges.push_back({i + 1, i, EdgeKind::kSpatialCurrent, true});
  }
  Eigen::MatrixXd f = node_features(g);
  for (int k = 0; k < 2; ++k) {
    const double w = p.layer(k).w_att;
    Eigen::MatrixXd next(dim, 4);
    for (int v = 0; v < 4; ++v) {
      Eigen::VectorXd msg = Eigen::VectorXd::Zero(dim);
      if (v == 0 || v == 3) {
        msg = f.col(v == 0 ? 1 : 2);
      } else {
        const double e1 = std::exp(w * direct_cosine(f.col(v - 1), f.col(v)));
        const double e2 = std::exp(w * direct_cosine(f.col(v + 1), f.col(v)));
        msg = (e1 * f.col(v - 1) + e2 * f.col(v + 1)) / (e1 + e2);
      }
      next.col(v) = (p.layer(k).w_self * f.col(v) + p.layer(k).w_msg * msg).cwiseMax(0.0);
    }
    f = next;
  }
  EXPECT_LT((message_pass(g, node_features(g), p) - f).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(MessagePass, UngatedUsesUniformMean) {
  Rng rng(8);
  GnnConfig cfg = small_config(3, 1);
  cfg.gating = false;
  const GnnParams p = GnnParams::random(cfg, rng);
  const STGraph g = random_graph(2, 2, 3, rng);
  GnnTrace trace;
  message_pass(g, node_features(g), p, nullptr, &trace);
  for (const auto& w : trace.iterations[0].weights) {
    for (Eigen::Index k = 0; k < w.size(); ++k) EXPECT_NEAR(w(k), 1.0 / 3.0, 1e-15);
  }
}

TEST(MessagePass, PrunedEqualsStructurallyRemovedEdges) {
  Rng rng(9);
  const GnnParams p = GnnParams::random(small_config(5, 3), rng);
  for (int trial = 0; trial < 30; ++trial) {
    const STGraph g = prune(random_graph(5, 4, 5, rng, 40), PruningConfig{15, 5});
    STGraph stripped = g;
    stripped.edges.clear();
    for (const auto& e : g.edges) {
      if (e.active) stripped.edges.push_back(e);
    }
    EXPECT_EQ(gnn_forward(g, p), gnn_forward(stripped, p));
    MessagePassStats pruned, full;
    gnn_forward(g, p, nullptr, &pruned);
    STGraph unpruned = g;
    for (auto& e : unpruned.edges) e.active = true;
    gnn_forward(unpruned, p, nullptr, &full);
    if (g.active_edge_count() < g.edges.size()) {
      EXPECT_LT(pruned.edge_computations, full.edge_computations);
    }
    EXPECT_EQ(full.edge_computations, 3 * g.edges.size());
  }
}

TEST(MessagePass, AttentionWeightsNormalizedPerNode) {
  Rng rng(10);
  const GnnParams p = GnnParams::random(small_config(6, 3), rng);
  const STGraph g = prune(random_graph(6, 5, 6, rng, 25), PruningConfig{15, 5});
  GnnTrace trace;
  message_pass(g, node_features(g), p, nullptr, &trace);
  for (const auto& it : trace.iterations) {
    for (const auto& w : it.weights) {
      if (w.size() == 0) continue;
      EXPECT_NEAR(w.sum(), 1.0, 1e-12);
      EXPECT_TRUE((w.array() > 0).all());
    }
  }
}

TEST(Affinity, ZeroHeadAndZeroFeature) {
  Rng rng(11);
  GnnParams p = GnnParams::random(small_config(4), rng);
  const Eigen::VectorXd a = random_vector(4, rng), b = random_vector(4, rng);
  const double bias_only = mlp_by_hand(p.head, Eigen::VectorXd::Zero(4));
  EXPECT_NEAR(affinity(a, Eigen::VectorXd::Zero(4), p.head), bias_only, 1e-15);
  for (auto& layer : p.head.layers()) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  EXPECT_EQ(affinity(a, b, p.head), 0.5);
  const STGraph g = random_graph(3, 2, 4, rng);
  const Eigen::MatrixXd m = gnn_forward(g, p);
  EXPECT_EQ(m.rows(), 2);
  EXPECT_EQ(m.cols(), 3);
  EXPECT_TRUE((m.array() == 0.5).all());
}

TEST(Affinity, MatchesManualThreeLayerForward) {
  Rng rng(12);
  const GnnParams p = GnnParams::random(small_config(5), rng);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd a = random_vector(5, rng), b = random_vector(5, rng);
    EXPECT_NEAR(affinity(a, b, p.head), mlp_by_hand(p.head, a.cwiseProduct(b)), 1e-12);
  }
  GnnConfig cat = small_config(5);
  cat.combine = Combine::kConcat;
  const GnnParams q = GnnParams::random(cat, rng);
  const Eigen::VectorXd a = random_vector(5, rng), b = random_vector(5, rng);
  Eigen::VectorXd x(10);
  x << a, b;
  EXPECT_NEAR(affinity(a, b, q.head, Combine::kConcat), mlp_by_hand(q.head, x), 1e-12);
  EXPECT_THROW(affinity(a, Eigen::VectorXd::Ones(4), p.head), std::invalid_argument);
}

TEST(Affinity, MatrixEntriesMatchPerPairCalls) {
  Rng rng(13);
  for (bool normalize : {false, true}) {
    GnnConfig cfg = small_config(4, 2);
    cfg.normalize = normalize;
    const GnnParams p = GnnParams::random(cfg, rng);
    const STGraph g = random_graph(4, 3, 4, rng);
    const Eigen::MatrixXd f = message_pass(g, node_features(g), p);
    const Eigen::MatrixXd a = affinity_matrix(g, f, p);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 4; ++j) {
        Eigen::VectorXd ft = f.col(g.track_node(i)), fd = f.col(j);
        if (normalize) {
          ft.array() -= ft.mean();
          fd.array() -= fd.mean();
          ft *= 2.0 / ft.norm();
          fd *= 2.0 / fd.norm();
          EXPECT_NEAR(a(i, j), affinity(ft, fd, p.head), 1e-12);
        } else {
          EXPECT_EQ(a(i, j), affinity(ft, fd, p.head));
        }
        EXPECT_GT(a(i, j), 0.0);
        EXPECT_LT(a(i, j), 1.0);
      }
    }
  }
}

TEST(Affinity, EmptySidesGiveEmptyMatrix) {
  Rng rng(14);
  const GnnParams p = GnnParams::random(small_config(4), rng);
  EXPECT_EQ(gnn_forward(random_graph(3, 0, 4, rng), p).size(), 0);
  EXPECT_EQ(gnn_forward(random_graph(0, 2, 4, rng), p).size(), 0);
  EXPECT_EQ(gnn_forward(STGraph{}, p).size(), 0);
}

TEST(Backward, MatchesFiniteDifferencesOnThreeByTwoGraph) {
  Rng rng(15);
  for (int variant = 0; variant < 6; ++variant) {
    GnnConfig cfg = small_config(5, 3);
    cfg.normalize = variant % 2 == 0;
    cfg.tied = variant == 2;
    cfg.gating = variant != 3;
    cfg.combine = variant == 4 ? Combine::kConcat : Combine::kProduct;
    cfg.identity_init = variant != 5;
    cfg.attention_init = 1.5;
    GnnParams p = GnnParams::random(cfg, rng);
    const STGraph g = random_graph(2, 3, 5, rng, 8);
    EXPECT_LT(check_gradients(g, p, diagonal_target(3, 2)), 1e-5) << "variant " << variant;
  }
}

TEST(Backward, InputFeatureGradient) {
  Rng rng(16);
  GnnParams p = GnnParams::random(small_config(4, 2), rng);
  const STGraph g = random_graph(2, 2, 4, rng, 8);
  const Eigen::MatrixXd target = diagonal_target(2, 2);
  const Eigen::MatrixXd f0 = node_features(g);
  GnnTrace trace;
  const Eigen::MatrixXd final_f = message_pass(g, f0, p, nullptr, &trace);
  Eigen::MatrixXd ga;
  tracking_loss(affinity_matrix(g, final_f, p, &trace), target, &ga);
  GnnParams grad = p.zeros_like();
  Eigen::MatrixXd gf;
  gnn_backward(g, p, trace, ga, grad, &gf);
  const Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(f0.data(), f0.size());
  const auto r = grad_check(
      [&](const Eigen::VectorXd& x) {
        const Eigen::MatrixXd f = Eigen::Map<const Eigen::MatrixXd>(x.data(), f0.rows(), f0.cols());
        return tracking_loss(affinity_matrix(g, message_pass(g, f, p), p), target);
      },
      x0, Eigen::Map<const Eigen::VectorXd>(gf.data(), gf.size()));
  EXPECT_LT(r.max_rel_error, 1e-5);
}

TEST(Backward, ZeroLossGivesZeroGradient) {
  Rng rng(17);
  GnnParams p = GnnParams::random(small_config(4, 2), rng);
  const STGraph g = random_graph(3, 2, 4, rng);
  GnnTrace trace;
  const Eigen::MatrixXd a = gnn_forward(g, p, &trace);
  Eigen::MatrixXd ga;
  EXPECT_EQ(tracking_loss(a, a, &ga), 0.0);
  GnnParams grad = p.zeros_like();
  gnn_backward(g, p, trace, ga, grad);
  ParamList glist;
  grad.append_params(glist, "g");
  EXPECT_EQ(flatten(glist).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, AttentionGradientVanishesForEqualSimilarities) {
  Rng rng(18);
  GnnParams p = GnnParams::random(small_config(4, 3), rng);
  STGraph g = random_graph(3, 2, 4, rng, 8);
  const Eigen::VectorXd shared = random_vector(4, rng).cwiseAbs();
  for (auto& n : g.nodes) n.feature.vector = shared;
  GnnTrace trace;
  const Eigen::MatrixXd a = gnn_forward(g, p, &trace);
  Eigen::MatrixXd ga;
  tracking_loss(a, diagonal_target(2, 3), &ga);
  GnnParams grad = p.zeros_like();
  gnn_backward(g, p, trace, ga, grad);
  for (const auto& layer : grad.layers) EXPECT_NEAR(layer.w_att, 0.0, 1e-14);
}
