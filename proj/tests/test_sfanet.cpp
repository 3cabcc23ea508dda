#include "detectrack/sfanet.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace detectrack;
using detectrack::testing::random_tensor;

namespace {

FeatureMap make_map(const Tensor3& t, int timestamp, View view = View::kBev) {
  return FeatureMap{t, timestamp, view};
}

}  // namespace

TEST(SfaNet, ZeroWeightsGiveHalfAttention) {
  Rng rng(1);
  const FeatureMap cur = make_map(random_tensor(3, 5, 4, rng), 1);
  const FeatureMap prev = make_map(random_tensor(3, 5, 4, rng), 0);
  const auto [a_t, a_prev] = attention_maps(cur, prev, SfaNet::zeros(3));
  ASSERT_EQ(a_t.tensor.dimension(0), 1);
  for (Eigen::Index i = 0; i < a_t.tensor.size(); ++i) {
    EXPECT_EQ(a_t.tensor.data()[i], 0.5);
    EXPECT_EQ(a_prev.tensor.data()[i], 0.5);
  }
  const FeatureMap out = aggregate(cur, &prev, SfaNet::zeros(3));
  for (Eigen::Index i = 0; i < out.tensor.size(); ++i) {
    EXPECT_NEAR(out.tensor.data()[i], 0.5 * cur.tensor.data()[i] + 0.5 * prev.tensor.data()[i],
                1e-15);
  }
}

TEST(SfaNet, AttentionPairSumsToOne) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const SfaNet net = SfaNet::random(2, 1 + trial % 3, 4, rng);
    const FeatureMap cur = make_map(random_tensor(2, 4, 6, rng) * 3.0, 5);
    const FeatureMap prev = make_map(random_tensor(2, 4, 6, rng) * 3.0, 4);
    const auto [a_t, a_prev] = attention_maps(cur, prev, net);
    for (Eigen::Index i = 0; i < a_t.tensor.size(); ++i) {
      EXPECT_EQ(a_t.tensor.data()[i] + a_prev.tensor.data()[i], 1.0);
      EXPECT_GT(a_t.tensor.data()[i], 0.0);
      EXPECT_LT(a_t.tensor.data()[i], 1.0);
    }
  }
}

TEST(SfaNet, MatchesSigmoidOfConvComposition) {
  Rng rng(3);
  const SfaNet net = SfaNet::random(3, 1, 8, rng);
  const Tensor3 cur = random_tensor(3, 5, 5, rng), prev = random_tensor(3, 5, 5, rng);
  const Tensor3 stacked = cur.concatenate(prev, 0);
  const Tensor3 logits = conv3x3(stacked, net.layers[0]);
  const auto [a_t, a_prev] = attention_maps(make_map(cur, 1), make_map(prev, 0), net);
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    EXPECT_EQ(a_t.tensor.data()[i], sigmoid(logits.data()[i]));
  }
}

TEST(SfaNet, IdenticalFramesPassThrough) {
  Rng rng(4);
  const SfaNet net = SfaNet::random(2, 2, 4, rng);
  const Tensor3 t = random_tensor(2, 6, 3, rng);
  const FeatureMap prev = make_map(t, 0);
  const FeatureMap out = aggregate(make_map(t, 1), &prev, net);
  for (Eigen::Index i = 0; i < t.size(); ++i) EXPECT_NEAR(out.tensor.data()[i], t.data()[i], 1e-15);
}

TEST(SfaNet, OutputIsElementwiseConvex) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const SfaNet net = SfaNet::random(3, 1 + trial % 2, 5, rng);
    const FeatureMap cur = make_map(random_tensor(3, 4, 4, rng), 2);
    const FeatureMap prev = make_map(random_tensor(3, 4, 4, rng), 1);
    const FeatureMap out = aggregate(cur, &prev, net);
    for (Eigen::Index i = 0; i < out.tensor.size(); ++i) {
      const double a = cur.tensor.data()[i], b = prev.tensor.data()[i];
      EXPECT_GE(out.tensor.data()[i], std::min(a, b) - 1e-15);
      EXPECT_LE(out.tensor.data()[i], std::max(a, b) + 1e-15);
    }
  }
}

TEST(SfaNet, FirstFrameUnchanged) {
  Rng rng(6);
  const FeatureMap cur = make_map(random_tensor(2, 3, 3, rng), 0);
  const FeatureMap out = aggregate(cur, nullptr, SfaNet::random(2, 1, 4, rng));
  for (Eigen::Index i = 0; i < cur.tensor.size(); ++i)
    EXPECT_EQ(out.tensor.data()[i], cur.tensor.data()[i]);
}

TEST(SfaNet, MismatchedInputsRejected) {
  Rng rng(7);
  const SfaNet net = SfaNet::zeros(2);
  const FeatureMap cur = make_map(random_tensor(2, 3, 3, rng), 1);
  EXPECT_THROW(attention_maps(cur, make_map(random_tensor(2, 3, 4, rng), 0), net),
               std::invalid_argument);
  EXPECT_THROW(attention_maps(cur, make_map(random_tensor(2, 3, 3, rng), 0, View::kCameraView), net),
               std::invalid_argument);
  EXPECT_THROW(attention_maps(cur, make_map(random_tensor(2, 3, 3, rng), 3), net),
               std::invalid_argument);
  EXPECT_THROW(attention_maps(cur, make_map(random_tensor(2, 3, 3, rng), 0), SfaNet::zeros(3)),
               std::invalid_argument);
}

TEST(SfaNet, GradientsMatchFiniteDifferences) {
  Rng rng(8);
  for (int depth = 1; depth <= 3; ++depth) {
    SfaNet net = SfaNet::random(2, depth, 3, rng);
    const FeatureMap cur = make_map(random_tensor(2, 4, 5, rng), 1);
    const FeatureMap prev = make_map(random_tensor(2, 4, 5, rng), 0);
    const Tensor3 w = random_tensor(2, 4, 5, rng);
    auto loss = [&](const FeatureMap& c, const FeatureMap& p) {
      const FeatureMap out = aggregate(c, &p, net);
      double acc = 0;
      for (Eigen::Index i = 0; i < out.tensor.size(); ++i) acc += w.data()[i] * out.tensor.data()[i];
      return acc;
    };
    SfaCache cache;
    aggregate(cur, prev, net, cache);
    SfaNet grad = net.zeros_like();
    Tensor3 g_cur, g_prev;
    aggregate_backward(cache, net, w, grad, &g_cur, &g_prev);

    ParamList params, grads;
    net.append_params(params, "net");
    grad.append_params(grads, "net");
    const Eigen::VectorXd p0 = flatten(params);
    const auto r = grad_check(
        [&](const Eigen::VectorXd& p) {
          assign(params, p);
          return loss(cur, prev);
        },
        p0, flatten(grads));
    assign(params, p0);
    EXPECT_LT(r.max_rel_error, 1e-5) << "depth " << depth;

    const Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(cur.tensor.data(), cur.tensor.size());
    const auto rc = grad_check(
        [&](const Eigen::VectorXd& x) {
          FeatureMap c = cur;
          Eigen::Map<Eigen::VectorXd>(c.tensor.data(), c.tensor.size()) = x;
          return loss(c, prev);
        },
        x0, Eigen::Map<const Eigen::VectorXd>(g_cur.data(), g_cur.size()));
    EXPECT_LT(rc.max_rel_error, 1e-5);
    const Eigen::VectorXd y0 =
        Eigen::Map<const Eigen::VectorXd>(prev.tensor.data(), prev.tensor.size());
    const auto rp = grad_check(
        [&](const Eigen::VectorXd& y) {
          FeatureMap p = prev;
          Eigen::Map<Eigen::VectorXd>(p.tensor.data(), p.tensor.size()) = y;
          return loss(cur, p);
        },
        y0, Eigen::Map<const Eigen::VectorXd>(g_prev.data(), g_prev.size()));
    EXPECT_LT(rp.max_rel_error, 1e-5);
  }
}

TEST(SfaNet, PairKeepsSeparateWeights) {
  Rng rng(9);
  SfaNetPair pair{SfaNet::random(2, 1, 4, rng), SfaNet::random(2, 1, 4, rng)};
  ParamList params;
  pair.append_params(params, "sfanet");
  ASSERT_EQ(params.size(), 4u);
  EXPECT_EQ(params[0].name, "sfanet.camera.conv0.kernel");
  EXPECT_EQ(params[2].name, "sfanet.bev.conv0.kernel");
  EXPECT_NE(params[0].data, params[2].data);
  EXPECT_EQ(&pair.for_view(View::kBev), &pair.bev);
  EXPECT_EQ(&pair.for_view(View::kCameraView), &pair.camera);
}
