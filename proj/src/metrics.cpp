#include "detectrack/metrics.hpp"

#include "detectrack/hungarian.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <sstream>

namespace detectrack {

FrameEval& FrameEval::operator+=(const FrameEval& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  idsw += o.idsw;
  gt += o.gt;
  iou_sum += o.iou_sum;
  return *this;
}

double MetricsConfig::threshold_for(int class_id) const {
  const auto it = class_thresholds.find(class_id);
  return it == class_thresholds.end() ? iou_threshold : it->second;
}

namespace {

struct FrameMatch {
  std::vector<std::pair<int, int>> pairs;  // (prediction index, gt index)
  std::vector<double> ious;
};

FrameMatch match_objects(const FrameObjects& predictions, const FrameObjects& gt,
                         const std::function<double(int)>& threshold_for) {
  FrameMatch out;
  if (predictions.empty() || gt.empty()) return out;
  const Eigen::Index np = static_cast<Eigen::Index>(predictions.size());
  const Eigen::Index ng = static_cast<Eigen::Index>(gt.size());
  Eigen::MatrixXd iou = Eigen::MatrixXd::Zero(np, ng);
  for (Eigen::Index p = 0; p < np; ++p) {
    for (Eigen::Index g = 0; g < ng; ++g) {
      const auto& pb = predictions[static_cast<std::size_t>(p)].box;
      const auto& gb = gt[static_cast<std::size_t>(g)].box;
      if (pb.class_id() != gb.class_id()) continue;
      const double v = iou_3d(pb, gb);
      if (v >= threshold_for(gb.class_id())) iou(p, g) = v;
    }
  }
  const std::vector<int> rows = hungarian_min_cost((1.0 - iou.array()).matrix(), 1.0);
  for (Eigen::Index p = 0; p < np; ++p) {
    const int g = rows[static_cast<std::size_t>(p)];
    if (g >= 0 && iou(p, g) > 0) {
      out.pairs.emplace_back(static_cast<int>(p), g);
      out.ious.push_back(iou(p, g));
    }
  }
  return out;
}

FrameObjects filter_by_score(const FrameObjects& objects, double min_score) {
  FrameObjects out;
  for (const auto& o : objects) {
    if (o.box.score() >= min_score) out.push_back(o);
  }
  return out;
}

}  // namespace

FrameEval ClearAccumulator::add_frame(const FrameObjects& predictions, const FrameObjects& gt) {
  const FrameMatch m =
      match_objects(predictions, gt, [this](int c) { return cfg_.threshold_for(c); });
  FrameEval e;
  e.gt = static_cast<long>(gt.size());
  e.tp = static_cast<long>(m.pairs.size());
  e.fp = static_cast<long>(predictions.size()) - e.tp;
  e.fn = e.gt - e.tp;
  for (std::size_t k = 0; k < m.pairs.size(); ++k) {
    const auto [p, g] = m.pairs[k];
    const int pred_id = predictions[static_cast<std::size_t>(p)].track_id;
    const int gt_id = gt[static_cast<std::size_t>(g)].track_id;
    const auto it = last_match_.find(gt_id);
    if (it != last_match_.end() && it->second != pred_id) ++e.idsw;
    last_match_[gt_id] = pred_id;
    e.iou_sum += m.ious[k];
    matched_scores_.push_back(predictions[static_cast<std::size_t>(p)].box.score());
  }
  totals_ += e;
  return e;
}

FrameEval match_frame(const FrameObjects& predictions, const FrameObjects& gt,
                      double iou_threshold) {
  MetricsConfig cfg;
  cfg.iou_threshold = iou_threshold;
  ClearAccumulator acc(cfg);
  return acc.add_frame(predictions, gt);
}

double mota(const FrameEval& t) {
  if (t.gt == 0) throw MetricsUndefined("MOTA undefined: no ground-truth objects");
  return 1.0 - static_cast<double>(t.fp + t.fn + t.idsw) / static_cast<double>(t.gt);
}

double motp(const FrameEval& t) {
  return t.tp == 0 ? 0.0 : t.iou_sum / static_cast<double>(t.tp);
}

FrameEval evaluate_clear(const std::vector<SequenceObjects>& predictions,
                         const std::vector<SequenceObjects>& gt, const MetricsConfig& cfg,
                         double min_score, std::vector<double>* matched_scores) {
  if (predictions.size() != gt.size()) {
    throw std::invalid_argument("evaluate: prediction and GT sequence counts differ");
  }
  FrameEval total;
  for (std::size_t s = 0; s < gt.size(); ++s) {
    if (predictions[s].size() != gt[s].size()) {
      throw std::invalid_argument("evaluate: prediction and GT frame counts differ");
    }
    ClearAccumulator acc(cfg);
    for (std::size_t f = 0; f < gt[s].size(); ++f) {
      acc.add_frame(filter_by_score(predictions[s][f], min_score), gt[s][f]);
    }
    total += acc.totals();
    if (matched_scores != nullptr) {
      matched_scores->insert(matched_scores->end(), acc.matched_scores().begin(),
                             acc.matched_scores().end());
    }
  }
  return total;
}

MetricReport evaluate(const std::vector<SequenceObjects>& predictions,
                      const std::vector<SequenceObjects>& gt, const MetricsConfig& cfg) {
  if (cfg.recall_steps < 1) throw std::invalid_argument("evaluate: recall_steps must be >= 1");
  std::vector<double> scores;
  MetricReport report;
  report.totals = evaluate_clear(predictions, gt, cfg, -1.0, &scores);
  if (report.totals.gt == 0) {
    throw MetricsUndefined("metrics undefined: sequence has no ground-truth objects");
  }
  report.mota = mota(report.totals);
  report.motp = motp(report.totals);

  std::sort(scores.begin(), scores.end(), std::greater<>());
  const double num_gt = static_cast<double>(report.totals.gt);
  const int steps = cfg.recall_steps;
  for (int k = 1; k <= steps; ++k) {
    RecallPoint pt;
    pt.recall = static_cast<double>(k) / steps;
    const auto needed = static_cast<std::size_t>(std::ceil(pt.recall * num_gt - 1e-9));
    if (needed >= 1 && needed <= scores.size()) {
      pt.reachable = true;
      pt.threshold = scores[needed - 1];
      const FrameEval e = evaluate_clear(predictions, gt, cfg, pt.threshold);
      const double errors = static_cast<double>(e.fp + e.fn + e.idsw);
      pt.mota = 1.0 - errors / num_gt;
      pt.smota = std::clamp(1.0 - (errors - (1.0 - pt.recall) * num_gt) / (pt.recall * num_gt),
                            0.0, 1.0);
      pt.motp = motp(e);
    }
    report.curve.push_back(pt);
  }
  for (const auto& pt : report.curve) {
    if (!pt.reachable) continue;
    report.amota += std::max(0.0, pt.mota);
    report.samota += pt.smota;
    report.amotp += pt.motp;
  }
  report.amota /= steps;
  report.samota /= steps;
  report.amotp /= steps;
  return report;
}

MetricReport evaluate(const SequenceObjects& predictions, const SequenceObjects& gt,
                      const MetricsConfig& cfg) {
  return evaluate(std::vector<SequenceObjects>{predictions}, std::vector<SequenceObjects>{gt}, cfg);
}

std::string report_to_json(const MetricReport& r, int indent) {
  nlohmann::json doc;
  doc["MOTA"] = r.mota;
  doc["MOTP"] = r.motp;
  doc["sAMOTA"] = r.samota;
  doc["AMOTA"] = r.amota;
  doc["AMOTP"] = r.amotp;
  doc["counts"] = {{"TP", r.totals.tp}, {"FP", r.totals.fp}, {"FN", r.totals.fn},
                   {"IDSW", r.totals.idsw}, {"GT", r.totals.gt}};
  auto& curve = doc["curve"] = nlohmann::json::array();
  for (const auto& pt : r.curve) {
    curve.push_back({{"recall", pt.recall}, {"reachable", pt.reachable},
                     {"threshold", pt.threshold}, {"MOTA", pt.mota},
                     {"sMOTA", pt.smota}, {"MOTP", pt.motp}});
  }
  return doc.dump(indent);
}

std::string report_to_table(const MetricReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << std::left << std::setw(10) << "metric" << std::right << std::setw(12) << "value" << '\n';
  const std::pair<const char*, double> rows[] = {
      {"sAMOTA", r.samota}, {"AMOTA", r.amota}, {"AMOTP", r.amotp},
      {"MOTA", r.mota},     {"MOTP", r.motp}};
  for (const auto& [name, value] : rows) {
    os << std::left << std::setw(10) << name << std::right << std::setw(12) << value << '\n';
  }
  const std::pair<const char*, long> counts[] = {{"TP", r.totals.tp},   {"FP", r.totals.fp},
                                                 {"FN", r.totals.fn},   {"IDSW", r.totals.idsw},
                                                 {"GT", r.totals.gt}};
  for (const auto& [name, value] : counts) {
    os << std::left << std::setw(10) << name << std::right << std::setw(12) << value << '\n';
  }
  return os.str();
}

std::string curve_to_csv(const MetricReport& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "recall,reachable,threshold,mota,smota,motp\n";
  for (const auto& pt : r.curve) {
    os << pt.recall << ',' << (pt.reachable ? 1 : 0) << ',' << pt.threshold << ',' << pt.mota
       << ',' << pt.smota << ',' << pt.motp << '\n';
  }
  return os.str();
}

}  // namespace detectrack
