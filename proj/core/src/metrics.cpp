#include "handfit/metrics.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace handfit {

PckCurve compute_pck_auc(const std::vector<Skeleton3d>& pred, const std::vector<Skeleton3d>& gt,
                         const std::vector<double>& thresholds) {
  if (pred.size() != gt.size()) throw std::invalid_argument("pck: size mismatch");
  if (thresholds.size() < 2) throw std::invalid_argument("pck: need at least two thresholds");
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (!(thresholds[i] > thresholds[i - 1]))
      throw std::invalid_argument("pck: thresholds must be strictly increasing");

  PckCurve curve;
  curve.thresholds = thresholds;
  const double total = static_cast<double>(pred.size()) * kNumJoints;
  for (const double thr : thresholds) {
    long long correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
      for (int j = 0; j < kNumJoints; ++j)
        if ((pred[i].row(j) - gt[i].row(j)).norm() <= thr) ++correct;
    curve.pck.push_back(total > 0 ? static_cast<double>(correct) / total : 0.0);
  }

  // trapezoid area normalized by the threshold span
  double area = 0.0;
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    area += 0.5 * (curve.pck[i] + curve.pck[i - 1]) * (thresholds[i] - thresholds[i - 1]);
  curve.auc = area / (thresholds.back() - thresholds.front());
  return curve;
}

SegMetrics compute_seg_metrics(const Eigen::MatrixXd& pred_mask, const Eigen::MatrixXd& gt_mask) {
  if (pred_mask.rows() != gt_mask.rows() || pred_mask.cols() != gt_mask.cols())
    throw std::invalid_argument("segmentation metric: shape mismatch");
  long long tp = 0, fp = 0, fn = 0;
  for (Eigen::Index r = 0; r < pred_mask.rows(); ++r)
    for (Eigen::Index c = 0; c < pred_mask.cols(); ++c) {
      const bool p = pred_mask(r, c) > 0.5;
      const bool g = gt_mask(r, c) > 0.5;
      tp += p && g;
      fp += p && !g;
      fn += !p && g;
    }
  SegMetrics m;
  m.iou = (tp + fp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp + fn) : 1.0;
  m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp)
                              : (fn == 0 ? 1.0 : 0.0);
  m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn)
                           : (fp == 0 ? 1.0 : 0.0);
  m.f1 = (m.precision + m.recall) > 0.0
             ? 100.0 * 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

SegMetrics average_seg_metrics(const std::vector<SegMetrics>& per_sample) {
  SegMetrics avg;
  if (per_sample.empty()) return avg;
  for (const auto& m : per_sample) {
    avg.iou += m.iou;
    avg.precision += m.precision;
    avg.recall += m.recall;
    avg.f1 += m.f1;
  }
  const double n = static_cast<double>(per_sample.size());
  avg.iou /= n;
  avg.precision /= n;
  avg.recall /= n;
  avg.f1 /= n;
  return avg;
}

void write_eval_report(const std::string& path, const EvalReport& report) {
  auto round4 = [](double v) { return std::round(v * 1e4) / 1e4; };
  nlohmann::json j;
  j["num_samples"] = report.num_samples;
  j["mean_joint_error"] = round4(report.mean_joint_error);
  j["pck"] = {{"thresholds", report.pck.thresholds}, {"auc", round4(report.pck.auc)}};
  std::vector<double> pck_rounded;
  for (double p : report.pck.pck) pck_rounded.push_back(round4(p));
  j["pck"]["values"] = pck_rounded;
  j["segmentation"] = {{"iou", round4(report.seg.iou)},
                       {"precision", round4(report.seg.precision)},
                       {"recall", round4(report.seg.recall)},
                       {"f1", round4(report.seg.f1)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open report file: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("short write to " + path);
}

}  // namespace handfit
