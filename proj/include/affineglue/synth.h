#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "affineglue/estimator.h"
#include "affineglue/geometry.h"

namespace affineglue {

// Plane n^T X = d in the first camera frame, |n| = 1.
struct ScenePlane {
  Eigen::Vector3d n = Eigen::Vector3d::UnitZ();
  double d = 1.0;
};

struct SceneParams {
  int num_points = 100;
  bool planar = true;
  double focal = 1000.0;
  int width = 1000;
  int height = 1000;
  double max_rotation_deg = 60.0;
  double min_baseline = 0.5;
  double max_baseline = 2.0;
  double min_depth = 3.0;
  double max_depth = 8.0;
  // Largest tilt of the scene plane away from fronto-parallel.
  double max_plane_tilt_deg = 60.0;
  // Taken verbatim when set; the generator then only samples points.
  std::optional<RelativePose> pose;
  std::optional<ScenePlane> plane;
};

struct SyntheticScene {
  RelativePose pose_gt;
  CameraIntrinsics K1 = CameraIntrinsics::FromFocal(1000.0, 500.0, 500.0);
  CameraIntrinsics K2 = CameraIntrinsics::FromFocal(1000.0, 500.0, 500.0);
  int width = 1000;
  int height = 1000;
  std::optional<ScenePlane> plane;
  GravityDirection v1 = GravityDirection::Down();
  GravityDirection v2 = GravityDirection::Down();
  std::vector<Eigen::Vector3d> points3d;
  // Local surface through each point; the scene plane for planar scenes.
  std::vector<ScenePlane> tangent_planes;
  uint64_t seed = 0;

  // Exact pixel correspondences with their affine frames.
  std::vector<AffineCorrespondence> correspondences;
};

struct NoiseConfig {
  double image_noise_px = 0.0;
  double gravity_noise_deg = 0.0;
  double affine_noise_px = 0.0;
  double outlier_ratio = 0.0;
  int pool_k = 1;
  // Probability that the true match is ranked first; otherwise its rank is
  // uniform over the remaining k - 1 slots.
  double top_rank_probability = 0.6;
  uint64_t seed = 0;

  // Throws kInvalidArgument.
  void Validate() const;
};

struct CorruptedScene {
  MatchPool pool;  // pixel coordinates
  // labels[i][r]: candidate r of source i is the true match.
  std::vector<std::vector<bool>> labels;
  std::vector<bool> is_outlier;
  GravityDirection v1 = GravityDirection::Down();
  GravityDirection v2 = GravityDirection::Down();
};

// Per-trial generator seed, independent of scheduling.
uint64_t TrialSeed(uint64_t master_seed, uint64_t trial);

// Throws kGenerationFailure after 1000 rejected camera/plane configurations.
SyntheticScene GenerateScene(const SceneParams& params, std::mt19937_64& rng);

// Pixel-space affine frame at pixel p1 of the homography induced by `plane`.
// Throws kGrazingPlane when the plane is within 1 degree of containing either
// viewing ray.
Eigen::Matrix2d ExactAffine(const SyntheticScene& scene, const ScenePlane& plane,
                            const ImagePoint& p1);

// Homography induced by `plane` in calibrated coordinates.
Eigen::Matrix3d PlaneHomography(const RelativePose& pose, const ScenePlane& plane);

// Rotates v by angle_deg about a random axis perpendicular to it.
GravityDirection PerturbGravity(const GravityDirection& v, double angle_deg,
                                std::mt19937_64& rng);

CorruptedScene Corrupt(const SyntheticScene& scene, const NoiseConfig& noise,
                       std::mt19937_64& rng);

enum class SolverKind { kPose1ACG, kHomography1ACG, kHomography4PC };

std::optional<SolverKind> ParseSolverKind(const std::string& name);
std::string SolverKindName(SolverKind kind);

// Best-candidate errors of one solver run, in degrees. Translation is
// folded by sign.
struct SolverTrial {
  bool failed = false;
  double rotation_deg = 0.0;
  double translation_deg = 0.0;
};

struct StabilityBin {
  double lo = 0.0;
  double hi = 0.0;
  int count_rotation = 0;
  int count_translation = 0;
};

struct StabilityReport {
  static constexpr int kBins = 60;
  static constexpr double kLogMin = -16.0;
  static constexpr double kLogMax = 2.0;

  std::vector<SolverTrial> trials;
  std::vector<StabilityBin> bins;
  int failures = 0;
  // Quantiles 0.5, 0.9, 0.99 of log10 errors over successful trials.
  std::array<double, 3> rotation_quantiles{};
  std::array<double, 3> translation_quantiles{};
};

struct NoiseLevelStats {
  double noise_px = 0.0;
  double mean_rotation_deg = 0.0;
  double mean_translation_deg = 0.0;
  double stderr_rotation = 0.0;
  double stderr_translation = 0.0;
  int failures = 0;
};

struct NoiseStudyOptions {
  double gravity_noise_deg = 0.1;
  double affine_noise_px = 0.5;
};

// Noiseless generate -> solve for every trial.
StabilityReport RunStabilityStudy(SolverKind solver, int trials, uint64_t seed,
                                  int threads = 1);

std::vector<NoiseLevelStats> RunNoiseStudy(
    SolverKind solver, const std::vector<double>& noise_levels, int trials,
    uint64_t seed, const NoiseStudyOptions& options = {}, int threads = 1);

// Single-trial solver evaluation shared by both studies.
SolverTrial RunSolverTrial(SolverKind solver, const NoiseConfig& noise,
                           uint64_t trial_seed);

struct EndToEndOptions {
  ModelKind model = ModelKind::kHomography;
  int num_points = 100;
  int k = 3;
  double outlier_ratio = 0.5;
  double image_noise_px = 1.0;
  // Each gravity vector is rotated by an angle uniform in [0, max].
  double max_gravity_noise_deg = 0.0;
  double affine_noise_px = 0.0;
  double top_rank_probability = 0.6;
  EstimatorConfig config;
};

struct EndToEndTrial {
  bool failed = false;
  double rotation_deg = 0.0;
  double translation_deg = 0.0;
  // Mean symmetric transfer error in pixels over the true inliers, measured
  // on noise-free projections (homography runs only).
  double transfer_error_px = 0.0;
  int inliers = 0;
  int iterations = 0;
  int lo_runs = 0;
  double runtime_s = 0.0;
  // Invariant checks on the run.
  bool score_reproducible = true;
  // Best score never drops across iterations, LO and the final LO.
  bool score_monotone = true;
};

// One synthetic trial of Estimate; the k = 1 restriction of the same pool is
// obtained with `truncate_k`.
EndToEndTrial RunEndToEndTrial(const EndToEndOptions& options,
                               uint64_t trial_seed,
                               std::optional<int> truncate_k = std::nullopt);

std::vector<EndToEndTrial> RunEndToEndStudy(const EndToEndOptions& options,
                                            int trials, uint64_t seed,
                                            int threads = 1);

}  // namespace affineglue
