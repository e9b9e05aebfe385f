#pragma once

#include <map>
#include <string>
#include <vector>

#include "handfit/types.hpp"

namespace handfit {

// PCK over (sample, joint) pairs at each threshold, plus the normalized
// trapezoidal area under that curve on [thresholds.front(), thresholds.back()].
struct PckCurve {
  std::vector<double> thresholds;
  std::vector<double> pck;
  double auc = 0.0;
};

PckCurve compute_pck_auc(const std::vector<Skeleton3d>& pred, const std::vector<Skeleton3d>& gt,
                         const std::vector<double>& thresholds);

// IoU, precision and recall in [0,1]; f1 is reported scaled by 100. The empty
// vs empty case counts as a perfect match.
struct SegMetrics {
  double iou = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

SegMetrics compute_seg_metrics(const Eigen::MatrixXd& pred_mask, const Eigen::MatrixXd& gt_mask);

SegMetrics average_seg_metrics(const std::vector<SegMetrics>& per_sample);

struct EvalReport {
  PckCurve pck;
  SegMetrics seg;
  double mean_joint_error = 0.0;  // model units
  int num_samples = 0;
};

// 4-decimal JSON serialization.
void write_eval_report(const std::string& path, const EvalReport& report);

}  // namespace handfit
