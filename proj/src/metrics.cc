#include "affineglue/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "affineglue/errors.h"

namespace affineglue {
namespace {

double Degrees(double radians) { return radians * 180.0 / M_PI; }

}  // namespace

double RotationErrorDeg(const Eigen::Matrix3d& R_gt,
                        const Eigen::Matrix3d& R_est) {
  // atan2 keeps small angles accurate where acos near 1 would not.
  const Eigen::Matrix3d D = R_gt.transpose() * R_est;
  const Eigen::Vector3d s(D(2, 1) - D(1, 2), D(0, 2) - D(2, 0), D(1, 0) - D(0, 1));
  return Degrees(std::atan2(0.5 * s.norm(), 0.5 * (D.trace() - 1.0)));
}

double TranslationErrorDeg(const Eigen::Vector3d& t_gt,
                           const Eigen::Vector3d& t_est, TranslationSign mode) {
  const double norms = t_gt.norm() * t_est.norm();
  if (!(norms > 0.0)) return 90.0;
  double c = t_gt.dot(t_est);
  if (mode == TranslationSign::kFolded) c = std::abs(c);
  return Degrees(std::atan2(t_gt.cross(t_est).norm(), c));
}

PoseError ComputePoseError(const RelativePose& gt, const RelativePose& est,
                           TranslationSign mode) {
  PoseError e;
  e.rotation_deg = RotationErrorDeg(gt.R, est.R);
  e.translation_deg = TranslationErrorDeg(gt.t, est.t, mode);
  e.combined_deg = std::max(e.rotation_deg, e.translation_deg);
  return e;
}

double Auc(const std::vector<double>& errors, double threshold) {
  if (errors.empty()) throw Error(ErrorKind::kEmptyInput, "no errors");
  if (!(threshold > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "threshold must be positive");
  }
  // Recall steps up by 1/n at each error; integrating the step function up
  // to the threshold leaves (threshold - e) per error below it.
  double area = 0.0;
  for (const double e : errors) {
    if (e < threshold) area += threshold - e;
  }
  return area / (threshold * static_cast<double>(errors.size()));
}

double LowerMedian(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorKind::kEmptyInput, "no values");
  const size_t mid = (values.size() - 1) / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  return values[mid];
}

BenchmarkReport AggregateErrors(const std::vector<double>& errors,
                                const std::vector<double>& thresholds) {
  if (errors.empty()) throw Error(ErrorKind::kEmptyInput, "no trials");
  BenchmarkReport report;
  report.trials = static_cast<int>(errors.size());
  report.avg_deg = std::accumulate(errors.begin(), errors.end(), 0.0) /
                   static_cast<double>(errors.size());
  report.median_deg = LowerMedian(errors);
  for (const double tau : thresholds) report.auc[tau] = Auc(errors, tau);
  return report;
}

BenchmarkReport Aggregate(const std::vector<TrialOutcome>& trials,
                          const std::vector<double>& thresholds) {
  std::vector<double> errors;
  errors.reserve(trials.size());
  double inliers = 0.0;
  double runtime = 0.0;
  for (const auto& t : trials) {
    errors.push_back(t.error_deg.value_or(std::numeric_limits<double>::infinity()));
    inliers += t.error_deg ? t.inliers : 0;
    runtime += t.runtime_s;
  }
  BenchmarkReport report = AggregateErrors(errors, thresholds);
  report.mean_inliers = inliers / static_cast<double>(trials.size());
  report.mean_runtime_s = runtime / static_cast<double>(trials.size());
  return report;
}

}  // namespace affineglue
