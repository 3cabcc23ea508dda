#include "detectrack/sggnn.hpp"

#include <stdexcept>

namespace detectrack {

void GnnConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("GnnConfig: iterations must be >= 1");
  if (dim < 1) throw std::invalid_argument("GnnConfig: feature dimension must be >= 1");
  for (int h : head_hidden) {
    if (h < 1) throw std::invalid_argument("GnnConfig: head widths must be positive");
  }
  if (head_hidden.size() != 2) {
    throw std::invalid_argument("GnnConfig: the affinity head has exactly three layers");
  }
}

constexpr double kIdentityInitNoise = 0.1;

GnnParams GnnParams::random(const GnnConfig& config, Rng& rng) {
  config.validate();
  GnnParams p;
  p.config = config;
  const int count = config.tied ? 1 : config.iterations;
  for (int k = 0; k < count; ++k) {
    GnnLayer layer;
    layer.w_self.resize(config.dim, config.dim);
    layer.w_msg.resize(config.dim, config.dim);
    init_uniform_fan_in(layer.w_self, config.dim, rng);
    init_uniform_fan_in(layer.w_msg, config.dim, rng);
    if (config.identity_init) {
      layer.w_self *= kIdentityInitNoise;
      layer.w_self.diagonal().array() += 1.0;
      layer.w_msg *= kIdentityInitNoise;
    }
    layer.w_att = config.attention_init;
    p.layers.push_back(std::move(layer));
  }
  const int head_in = config.combine == Combine::kProduct ? config.dim : 2 * config.dim;
  p.head = make_score_head(head_in, config.head_hidden, rng);
  return p;
}

GnnParams GnnParams::zeros_like() const {
  GnnParams out = *this;
  for (auto& layer : out.layers) {
    layer.w_self.setZero();
    layer.w_msg.setZero();
    layer.w_att = 0;
  }
  out.head = head.zeros_like();
  return out;
}

void GnnParams::append_params(ParamList& out, const std::string& prefix) {
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const std::string base = prefix + ".iter" + std::to_string(k);
    out.push_back(make_block(base + ".w_self", layers[k].w_self));
    out.push_back(make_block(base + ".w_msg", layers[k].w_msg));
    out.push_back(make_block(base + ".w_att", layers[k].w_att));
  }
  head.append_params(out, prefix + ".head");
}

namespace {

// Below this norm product a feature pair is treated as uncorrelated. Exact
// zeros only arise from dead ReLU columns, where the similarity is locally
// constant, so a zero gradient is exact there.
constexpr double kDegenerateNorm = 1e-12;

double guarded_cosine(const Eigen::Ref<const Eigen::VectorXd>& a,
                      const Eigen::Ref<const Eigen::VectorXd>& b) {
  const double denom = a.norm() * b.norm();
  if (denom < kDegenerateNorm) return 0;
  return a.dot(b) / denom;
}

// Adds g * d cos(a, b) / da and g * d cos(a, b) / db.
void cosine_backward(const Eigen::Ref<const Eigen::VectorXd>& a,
                     const Eigen::Ref<const Eigen::VectorXd>& b, double s, double g,
                     Eigen::Ref<Eigen::VectorXd> grad_a,
                     Eigen::Ref<Eigen::VectorXd> grad_b) {
  const double na = a.norm(), nb = b.norm();
  if (na * nb < kDegenerateNorm || g == 0) return;
  const double inv = 1.0 / (na * nb);
  grad_a += g * (b * inv - s * a / (na * na));
  grad_b += g * (a * inv - s * b / (nb * nb));
}

std::vector<std::vector<int>> active_sources(const STGraph& graph) {
  std::vector<std::vector<int>> sources(graph.nodes.size());
  for (const auto& e : graph.edges) {
    if (e.active) sources[static_cast<std::size_t>(e.dst)].push_back(e.src);
  }
  return sources;
}

}  // namespace

Eigen::VectorXd attention_weights(const Eigen::VectorXd& target,
                                  std::span<const Eigen::VectorXd> sources, double w) {
  if (sources.empty()) {
    throw std::invalid_argument("attention_weights: need at least one source");
  }
  const double nt = target.norm();
  if (!(nt > 0)) throw std::domain_error("attention_weights: zero-norm target feature");
  Eigen::VectorXd logits(static_cast<Eigen::Index>(sources.size()));
  for (std::size_t k = 0; k < sources.size(); ++k) {
    if (sources[k].size() != target.size()) {
      throw std::invalid_argument("attention_weights: dimension mismatch");
    }
    const double ns = sources[k].norm();
    if (!(ns > 0)) throw std::domain_error("attention_weights: zero-norm source feature");
    logits(static_cast<Eigen::Index>(k)) = w * sources[k].dot(target) / (ns * nt);
  }
  return softmax(logits);
}

Eigen::MatrixXd node_features(const STGraph& graph) {
  if (graph.nodes.empty()) return {};
  const Eigen::Index d = graph.nodes.front().feature.vector.size();
  Eigen::MatrixXd f(d, static_cast<Eigen::Index>(graph.nodes.size()));
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    if (graph.nodes[i].feature.vector.size() != d) {
      throw std::invalid_argument("node_features: inconsistent feature dimension");
    }
    f.col(static_cast<Eigen::Index>(i)) = graph.nodes[i].feature.vector;
  }
  return f;
}

Eigen::MatrixXd message_pass(const STGraph& graph, const Eigen::MatrixXd& features,
                             const GnnParams& params, MessagePassStats* stats,
                             GnnTrace* trace) {
  const auto& cfg = params.config;
  const Eigen::Index n = static_cast<Eigen::Index>(graph.nodes.size());
  if (features.cols() != n) {
    throw std::invalid_argument("message_pass: one feature column per node expected");
  }
  if (n > 0 && features.rows() != cfg.dim) {
    throw std::invalid_argument("message_pass: feature dimension " +
                                std::to_string(features.rows()) + " does not match " +
                                std::to_string(cfg.dim));
  }
  const auto sources = active_sources(graph);
  if (trace != nullptr) {
    trace->sources = sources;
    trace->iterations.clear();
  }

  Eigen::MatrixXd current = features;
  for (int k = 0; k < cfg.iterations; ++k) {
    const GnnLayer& layer = params.layer(k);
    IterationTrace it;
    it.aggregated = Eigen::MatrixXd::Zero(cfg.dim, n);
    if (trace != nullptr) {
      it.similarity.resize(static_cast<std::size_t>(n));
      it.weights.resize(static_cast<std::size_t>(n));
    }
    for (Eigen::Index v = 0; v < n; ++v) {
      const auto& src = sources[static_cast<std::size_t>(v)];
      if (src.empty()) continue;
      const Eigen::Index m = static_cast<Eigen::Index>(src.size());
      Eigen::VectorXd weights;
      Eigen::VectorXd sims;
      if (cfg.gating) {
        sims.resize(m);
        for (Eigen::Index e = 0; e < m; ++e) {
          sims(e) = guarded_cosine(current.col(src[static_cast<std::size_t>(e)]), current.col(v));
        }
        weights = softmax((layer.w_att * sims).eval());
      } else {
        weights = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
      }
      for (Eigen::Index e = 0; e < m; ++e) {
        it.aggregated.col(v) += weights(e) * current.col(src[static_cast<std::size_t>(e)]);
      }
      if (stats != nullptr) stats->edge_computations += static_cast<std::size_t>(m);
      if (trace != nullptr) {
        it.similarity[static_cast<std::size_t>(v)] = std::move(sims);
        it.weights[static_cast<std::size_t>(v)] = std::move(weights);
      }
    }
    Eigen::MatrixXd pre = layer.w_self * current;
    pre.noalias() += layer.w_msg * it.aggregated;
    Eigen::MatrixXd next = pre.cwiseMax(0.0);
    if (trace != nullptr) {
      it.input = current;
      it.output = next;
      trace->iterations.push_back(std::move(it));
    }
    current = std::move(next);
  }
  return current;
}

namespace {

Eigen::VectorXd head_input(const Eigen::Ref<const Eigen::VectorXd>& track,
                           const Eigen::Ref<const Eigen::VectorXd>& det, Combine combine) {
  if (combine == Combine::kProduct) return track.cwiseProduct(det);
  Eigen::VectorXd x(track.size() + det.size());
  x << track, det;
  return x;
}

// Columns centered, then rescaled to norm sqrt(rows).
Eigen::MatrixXd normalize_columns(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = m;
  const double target = std::sqrt(static_cast<double>(m.rows()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    out.col(c).array() -= m.col(c).mean();
    const double norm = out.col(c).norm();
    if (norm < kDegenerateNorm) {
      out.col(c).setZero();
    } else {
      out.col(c) *= target / norm;
    }
  }
  return out;
}

}  // namespace

double affinity(const Eigen::VectorXd& track_feature, const Eigen::VectorXd& det_feature,
                const Mlp& head, Combine combine) {
  if (track_feature.size() != det_feature.size()) {
    throw std::invalid_argument("affinity: feature dimension mismatch");
  }
  const Eigen::VectorXd x = head_input(track_feature, det_feature, combine);
  if (x.size() != head.input_width()) {
    throw std::invalid_argument("affinity: head input width mismatch");
  }
  return head.forward(x)(0, 0);
}

Eigen::MatrixXd affinity_matrix(const STGraph& graph, const Eigen::MatrixXd& final_features,
                                const GnnParams& params, GnnTrace* trace) {
  const int nd = graph.num_detections, nt = graph.num_tracks;
  Eigen::MatrixXd a(nt, nd);
  if (nd == 0 || nt == 0) {
    if (trace != nullptr) trace->affinity = a;
    return a;
  }
  const Eigen::MatrixXd f =
      params.config.normalize ? normalize_columns(final_features) : final_features;
  const Eigen::Index in = params.head.input_width();
  Eigen::MatrixXd x(in, static_cast<Eigen::Index>(nd) * nt);
  for (int i = 0; i < nt; ++i) {
    for (int j = 0; j < nd; ++j) {
      x.col(static_cast<Eigen::Index>(i) * nd + j) =
          head_input(f.col(graph.track_node(i)), f.col(j), params.config.combine);
    }
  }
  Mlp::Cache cache;
  const Eigen::MatrixXd out = params.head.forward(x, cache);
  for (int i = 0; i < nt; ++i) {
    for (int j = 0; j < nd; ++j) a(i, j) = out(0, static_cast<Eigen::Index>(i) * nd + j);
  }
  if (trace != nullptr) {
    trace->affinity_input = std::move(x);
    trace->head_cache = std::move(cache);
    trace->affinity = a;
  }
  return a;
}

Eigen::MatrixXd gnn_forward(const STGraph& graph, const GnnParams& params, GnnTrace* trace,
                            MessagePassStats* stats) {
  if (graph.nodes.empty()) return Eigen::MatrixXd(graph.num_tracks, graph.num_detections);
  const Eigen::MatrixXd features = node_features(graph);
  const Eigen::MatrixXd final_features = message_pass(graph, features, params, stats, trace);
  return affinity_matrix(graph, final_features, params, trace);
}

void gnn_backward(const STGraph& graph, const GnnParams& params, const GnnTrace& trace,
                  const Eigen::MatrixXd& grad_affinity, GnnParams& grad,
                  Eigen::MatrixXd* grad_features) {
  const auto& cfg = params.config;
  const int nd = graph.num_detections, nt = graph.num_tracks;
  const Eigen::Index n = static_cast<Eigen::Index>(graph.nodes.size());
  if (n == 0 || trace.iterations.empty()) {
    if (grad_features != nullptr) *grad_features = Eigen::MatrixXd::Zero(cfg.dim, n);
    return;
  }
  const Eigen::MatrixXd& final_features = trace.iterations.back().output;
  const Eigen::MatrixXd f = cfg.normalize ? normalize_columns(final_features) : final_features;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(cfg.dim, n);

  if (nd > 0 && nt > 0) {
    Eigen::MatrixXd d_out(1, static_cast<Eigen::Index>(nd) * nt);
    for (int i = 0; i < nt; ++i) {
      for (int j = 0; j < nd; ++j) d_out(0, static_cast<Eigen::Index>(i) * nd + j) = grad_affinity(i, j);
    }
    const Eigen::MatrixXd dx = params.head.backward(trace.head_cache, d_out, grad.head);
    for (int i = 0; i < nt; ++i) {
      const int ti = graph.track_node(i);
      for (int j = 0; j < nd; ++j) {
        const Eigen::Index c = static_cast<Eigen::Index>(i) * nd + j;
        if (cfg.combine == Combine::kProduct) {
          g.col(ti) += dx.col(c).cwiseProduct(f.col(j));
          g.col(j) += dx.col(c).cwiseProduct(f.col(ti));
        } else {
          g.col(ti) += dx.col(c).head(cfg.dim);
          g.col(j) += dx.col(c).tail(cfg.dim);
        }
      }
    }
    if (cfg.normalize) {
      for (Eigen::Index v = 0; v < n; ++v) {
        const Eigen::VectorXd centered =
            final_features.col(v).array() - final_features.col(v).mean();
        const double norm = centered.norm();
        if (norm < kDegenerateNorm) {
          g.col(v).setZero();
          continue;
        }
        const Eigen::VectorXd u = centered / norm;
        const double target = std::sqrt(static_cast<double>(cfg.dim));
        g.col(v) = target / norm * (g.col(v) - u.dot(g.col(v)) * u);
        g.col(v).array() -= g.col(v).mean();
      }
    }
  }

  for (int k = cfg.iterations - 1; k >= 0; --k) {
    const IterationTrace& it = trace.iterations[static_cast<std::size_t>(k)];
    const GnnLayer& layer = params.layer(k);
    GnnLayer& glayer = grad.layer(k);
    const Eigen::MatrixXd dz = (it.output.array() > 0.0).select(g, 0.0);
    glayer.w_self.noalias() += dz * it.input.transpose();
    glayer.w_msg.noalias() += dz * it.aggregated.transpose();
    const Eigen::MatrixXd dp = layer.w_msg.transpose() * dz;
    Eigen::MatrixXd df = layer.w_self.transpose() * dz;
    for (Eigen::Index v = 0; v < n; ++v) {
      const auto& src = trace.sources[static_cast<std::size_t>(v)];
      if (src.empty()) continue;
      const Eigen::VectorXd& a = it.weights[static_cast<std::size_t>(v)];
      const Eigen::Index m = static_cast<Eigen::Index>(src.size());
      for (Eigen::Index e = 0; e < m; ++e) {
        df.col(src[static_cast<std::size_t>(e)]) += a(e) * dp.col(v);
      }
      if (!cfg.gating) continue;
      const Eigen::VectorXd& s = it.similarity[static_cast<std::size_t>(v)];
      Eigen::VectorXd da(m);
      for (Eigen::Index e = 0; e < m; ++e) {
        da(e) = dp.col(v).dot(it.input.col(src[static_cast<std::size_t>(e)]));
      }
      const Eigen::VectorXd dl = a.cwiseProduct((da.array() - a.dot(da)).matrix());
      glayer.w_att += dl.dot(s);
      for (Eigen::Index e = 0; e < m; ++e) {
        const int u = src[static_cast<std::size_t>(e)];
        cosine_backward(it.input.col(u), it.input.col(v), s(e), dl(e) * layer.w_att,
                        df.col(u), df.col(v));
      }
    }
    g = std::move(df);
  }
  if (grad_features != nullptr) *grad_features = std::move(g);
}

}  // namespace detectrack
