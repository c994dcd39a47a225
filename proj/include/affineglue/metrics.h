#pragma once

#include <map>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "affineglue/geometry.h"

namespace affineglue {

// Solver studies compare translation directions up to sign; end-to-end runs
// have resolved the sign through cheirality.
enum class TranslationSign { kFolded, kUnsigned };

struct PoseError {
  double rotation_deg = 0.0;
  double translation_deg = 0.0;
  double combined_deg = 0.0;  // max of the two
};

double RotationErrorDeg(const Eigen::Matrix3d& R_gt, const Eigen::Matrix3d& R_est);
double TranslationErrorDeg(const Eigen::Vector3d& t_gt, const Eigen::Vector3d& t_est,
                           TranslationSign mode);
PoseError ComputePoseError(const RelativePose& gt, const RelativePose& est,
                           TranslationSign mode);

// Exact area under the empirical recall curve on [0, threshold], divided by
// the threshold. Failures enter as +inf. Throws kEmptyInput, and
// kInvalidArgument for a non-positive threshold.
double Auc(const std::vector<double>& errors, double threshold);

// Lower median: element floor((n - 1) / 2) of the sorted values.
double LowerMedian(std::vector<double> values);

struct TrialOutcome {
  std::optional<double> error_deg;  // empty for a failed trial
  int inliers = 0;
  double runtime_s = 0.0;
};

struct BenchmarkReport {
  double avg_deg = 0.0;
  double median_deg = 0.0;
  std::map<double, double> auc;
  double mean_inliers = 0.0;
  double mean_runtime_s = 0.0;
  int trials = 0;
};

// Throws kEmptyInput.
BenchmarkReport Aggregate(const std::vector<TrialOutcome>& trials,
                          const std::vector<double>& thresholds);

// Same summary from raw error values (+inf for failures).
BenchmarkReport AggregateErrors(const std::vector<double>& errors,
                                const std::vector<double>& thresholds);

}  // namespace affineglue
