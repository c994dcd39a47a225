#include "affineglue/synth.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include <Eigen/Dense>

#include "affineglue/errors.h"
#include "affineglue/metrics.h"
#include "affineglue/solvers.h"

namespace affineglue {
namespace {

constexpr int kMaxConfigurationAttempts = 1000;
const double kGrazingSin = std::sin(M_PI / 180.0);

double Radians(double deg) { return deg * M_PI / 180.0; }

double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double Gaussian(std::mt19937_64& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

Eigen::Vector3d RandomUnitVector(std::mt19937_64& rng) {
  Eigen::Vector3d v;
  do {
    v = {Gaussian(rng), Gaussian(rng), Gaussian(rng)};
  } while (v.norm() < 1e-8);
  return v.normalized();
}

Eigen::Matrix3d RandomRotation(std::mt19937_64& rng) {
  Eigen::Vector4d q;
  do {
    q = {Gaussian(rng), Gaussian(rng), Gaussian(rng), Gaussian(rng)};
  } while (q.norm() < 1e-8);
  q.normalize();
  return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
}

// Unit vector within `max_angle` of +z, uniform over the spherical cap.
Eigen::Vector3d RandomCapDirection(std::mt19937_64& rng, double max_angle) {
  const double z = Uniform(rng, std::cos(max_angle), 1.0);
  const double phi = Uniform(rng, 0.0, 2.0 * M_PI);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

bool InImage(const ImagePoint& p, int width, int height) {
  return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= width && p.y() <= height;
}

Eigen::Vector3d CameraCenter2(const RelativePose& pose) {
  return pose.R.transpose() * pose.t;
}

bool IsGrazing(const SyntheticScene& scene, const ScenePlane& plane,
               const Eigen::Vector3d& X) {
  const Eigen::Vector3d ray1 = X;
  const Eigen::Vector3d ray2 = X - CameraCenter2(scene.pose_gt);
  return std::abs(plane.n.dot(ray1)) < kGrazingSin * ray1.norm() ||
         std::abs(plane.n.dot(ray2)) < kGrazingSin * ray2.norm();
}

// Projects X into both cameras; empty when behind either camera or outside
// either image.
std::optional<std::pair<ImagePoint, ImagePoint>> ProjectBoth(
    const SyntheticScene& scene, const Eigen::Vector3d& X) {
  const Eigen::Vector3d X2 = scene.pose_gt.Transform(X);
  if (X.z() <= 0.0 || X2.z() <= 0.0) return std::nullopt;
  const ImagePoint p1 = DenormalizePoint(X.hnormalized(), scene.K1);
  const ImagePoint p2 = DenormalizePoint(X2.hnormalized(), scene.K2);
  if (!InImage(p1, scene.width, scene.height) ||
      !InImage(p2, scene.width, scene.height)) {
    return std::nullopt;
  }
  return std::make_pair(p1, p2);
}

bool SampleScenePoints(const SceneParams& params, SyntheticScene& scene,
                       std::mt19937_64& rng) {
  scene.points3d.clear();
  scene.tangent_planes.clear();
  scene.correspondences.clear();
  const int max_draws = 50 * params.num_points + 100;
  for (int draw = 0; draw < max_draws &&
                     static_cast<int>(scene.points3d.size()) < params.num_points;
       ++draw) {
    const ImagePoint pixel(Uniform(rng, 0.0, params.width),
                           Uniform(rng, 0.0, params.height));
    const Eigen::Vector3d ray = Homogeneous(NormalizePoint(pixel, scene.K1));
    Eigen::Vector3d X;
    ScenePlane tangent;
    if (scene.plane) {
      const double denom = scene.plane->n.dot(ray);
      if (!(denom > 0.0)) continue;
      X = (scene.plane->d / denom) * ray;
      tangent = *scene.plane;
    } else {
      X = Uniform(rng, params.min_depth, params.max_depth) * ray;
      tangent.n = RandomUnitVector(rng);
      tangent.d = tangent.n.dot(X);
      if (tangent.d < 0.0) {
        tangent.n = -tangent.n;
        tangent.d = -tangent.d;
      }
    }
    const auto projected = ProjectBoth(scene, X);
    if (!projected || IsGrazing(scene, tangent, X)) continue;
    AffineCorrespondence ac;
    ac.p1 = projected->first;
    ac.p2 = projected->second;
    ac.A = ExactAffine(scene, tangent, ac.p1);
    scene.points3d.push_back(X);
    scene.tangent_planes.push_back(tangent);
    scene.correspondences.push_back(ac);
  }
  return static_cast<int>(scene.points3d.size()) == params.num_points;
}

template <typename Fn>
void ParallelFor(int n, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  for (int w = 0; w < threads; ++w) {
    workers.emplace_back([&, w] {
      for (int i = w; i < n; i += threads) fn(i);
    });
  }
  for (auto& worker : workers) worker.join();
}

std::vector<RelativePose> CandidatePoses(SolverKind solver,
                                         const SyntheticScene& scene,
                                         const CorruptedScene& data) {
  std::vector<AffineCorrespondence> acs;
  for (size_t i = 0; i < data.pool.source_points.size(); ++i) {
    const MatchCandidate& c = data.pool.candidates[i].front();
    acs.push_back(NormalizeCorrespondence({data.pool.source_points[i], c.p2, *c.A},
                                          scene.K1, scene.K2));
  }
  std::vector<RelativePose> poses;
  switch (solver) {
    case SolverKind::kPose1ACG:
      return SolvePose1ACGravity(acs.front(), data.v1, data.v2).poses;
    case SolverKind::kHomography1ACG:
      for (const auto& h :
           SolveHomography1ACGravity(acs.front(), data.v1, data.v2).homographies) {
        if (h.pose) poses.push_back(*h.pose);
      }
      return poses;
    case SolverKind::kHomography4PC: {
      std::array<PointPair, 4> four;
      for (int i = 0; i < 4; ++i) four[i] = {acs[i].p1, acs[i].p2};
      for (const auto& d : DecomposeHomography(SolveHomography4PC(four).M)) {
        poses.push_back(d.pose);
      }
      return poses;
    }
  }
  return poses;
}

// Candidate closest to the ground truth by the larger of the two errors.
std::optional<PoseError> BestCandidateError(const RelativePose& gt,
                                            const std::vector<RelativePose>& poses,
                                            TranslationSign mode) {
  std::optional<PoseError> best;
  for (const auto& pose : poses) {
    const PoseError e = ComputePoseError(gt, pose, mode);
    if (!best || e.combined_deg < best->combined_deg) best = e;
  }
  return best;
}

double Quantile(std::vector<double> values, double q) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const size_t i = std::min(values.size() - 1,
                            static_cast<size_t>(q * static_cast<double>(values.size())));
  return values[i];
}

double Log10Error(double deg) { return std::log10(std::max(deg, 1e-16)); }

int BinOf(double log_error) {
  const double width =
      (StabilityReport::kLogMax - StabilityReport::kLogMin) / StabilityReport::kBins;
  const int bin = static_cast<int>(
      std::floor((log_error - StabilityReport::kLogMin) / width));
  return std::clamp(bin, 0, StabilityReport::kBins - 1);
}

}  // namespace

uint64_t TrialSeed(uint64_t master_seed, uint64_t trial) {
  // splitmix64 over the pair
  uint64_t z = master_seed + 0x9e3779b97f4a7c15ULL * (trial + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void NoiseConfig::Validate() const {
  if (image_noise_px < 0.0 || gravity_noise_deg < 0.0 || affine_noise_px < 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "noise magnitudes must be >= 0");
  }
  if (!(outlier_ratio >= 0.0 && outlier_ratio < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "outlier ratio must lie in [0, 1)");
  }
  if (pool_k < 1) throw Error(ErrorKind::kInvalidArgument, "pool_k must be >= 1");
  if (!(top_rank_probability >= 0.0 && top_rank_probability <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument,
                "top rank probability must lie in [0, 1]");
  }
}

Eigen::Matrix3d PlaneHomography(const RelativePose& pose, const ScenePlane& plane) {
  return pose.R - pose.t * plane.n.transpose() / plane.d;
}

Eigen::Matrix2d ExactAffine(const SyntheticScene& scene, const ScenePlane& plane,
                            const ImagePoint& p1) {
  const ImagePoint p1n = NormalizePoint(p1, scene.K1);
  const Eigen::Vector3d ray = Homogeneous(p1n);
  const double denom = plane.n.dot(ray);
  if (std::abs(denom) < kGrazingSin * ray.norm()) {
    throw Error(ErrorKind::kGrazingPlane, "plane contains the first viewing ray");
  }
  const Eigen::Vector3d X = (plane.d / denom) * ray;
  if (IsGrazing(scene, plane, X)) {
    throw Error(ErrorKind::kGrazingPlane, "plane contains the second viewing ray");
  }
  const Eigen::Matrix2d A =
      HomographyJacobian(PlaneHomography(scene.pose_gt, plane), p1n);
  return DenormalizeAffine(A, scene.K1, scene.K2);
}

SyntheticScene GenerateScene(const SceneParams& params, std::mt19937_64& rng) {
  if (params.num_points < 1 || params.width < 1 || params.height < 1 ||
      !(params.focal > 0.0) || !(params.min_depth > 0.0) ||
      params.max_depth < params.min_depth ||
      params.max_baseline < params.min_baseline) {
    throw Error(ErrorKind::kInvalidArgument, "invalid scene parameters");
  }
  SyntheticScene scene;
  scene.K1 = CameraIntrinsics::FromFocal(params.focal, 0.5 * params.width,
                                         0.5 * params.height);
  scene.K2 = scene.K1;
  scene.width = params.width;
  scene.height = params.height;

  for (int attempt = 0; attempt < kMaxConfigurationAttempts; ++attempt) {
    if (params.pose) {
      scene.pose_gt = *params.pose;
    } else {
      Eigen::Matrix3d R;
      do {
        R = RandomRotation(rng);
      } while (RotationErrorDeg(Eigen::Matrix3d::Identity(), R) >
               params.max_rotation_deg);
      scene.pose_gt = RelativePose::Make(
          R, RandomUnitVector(rng) *
                 Uniform(rng, params.min_baseline, params.max_baseline));
    }
    const Eigen::Vector3d v1 = RandomUnitVector(rng);
    scene.v1 = GravityDirection(v1);
    scene.v2 = GravityDirection(scene.pose_gt.R * v1);

    scene.plane.reset();
    if (params.plane) {
      scene.plane = params.plane;
    } else if (params.planar) {
      const ImagePoint center(Uniform(rng, 0.25, 0.75) * params.width,
                              Uniform(rng, 0.25, 0.75) * params.height);
      const Eigen::Vector3d c =
          Uniform(rng, params.min_depth, params.max_depth) *
          Homogeneous(NormalizePoint(center, scene.K1));
      ScenePlane plane;
      plane.n = RandomCapDirection(rng, Radians(params.max_plane_tilt_deg));
      plane.d = plane.n.dot(c);
      // Both cameras on the same side of the plane.
      if (!(plane.d > 0.0) ||
          !(plane.n.dot(CameraCenter2(scene.pose_gt)) < plane.d)) {
        continue;
      }
      scene.plane = plane;
    }
    if (SampleScenePoints(params, scene, rng)) return scene;
  }
  throw Error(ErrorKind::kGenerationFailure,
              "no overlapping configuration after " +
                  std::to_string(kMaxConfigurationAttempts) + " attempts");
}

GravityDirection PerturbGravity(const GravityDirection& v, double angle_deg,
                                std::mt19937_64& rng) {
  const Eigen::Vector3d g = v.vector();
  // Random axis perpendicular to g.
  Eigen::Vector3d axis;
  do {
    axis = RandomUnitVector(rng);
    axis -= axis.dot(g) * g;
  } while (axis.norm() < 1e-6);
  axis.normalize();
  return GravityDirection(Eigen::AngleAxisd(Radians(angle_deg), axis) * g);
}

CorruptedScene Corrupt(const SyntheticScene& scene, const NoiseConfig& noise,
                       std::mt19937_64& rng) {
  noise.Validate();
  const int n = static_cast<int>(scene.correspondences.size());
  if (n == 0) throw Error(ErrorKind::kInvalidArgument, "scene has no points");
  if (noise.pool_k > n) {
    throw Error(ErrorKind::kInvalidArgument, "pool_k exceeds the number of points");
  }
  CorruptedScene out;
  out.v1 = PerturbGravity(scene.v1, noise.gravity_noise_deg, rng);
  out.v2 = PerturbGravity(scene.v2, noise.gravity_noise_deg, rng);

  const double affine_sigma =
      noise.affine_noise_px / (0.5 * (scene.K1.MeanFocal() + scene.K2.MeanFocal()));
  std::vector<ImagePoint> targets(n);
  std::vector<Eigen::Matrix2d> affines(n);
  out.pool.source_points.resize(n);
  for (int i = 0; i < n; ++i) {
    const AffineCorrespondence& ac = scene.correspondences[i];
    out.pool.source_points[i] =
        ac.p1 + noise.image_noise_px * ImagePoint(Gaussian(rng), Gaussian(rng));
    targets[i] = ac.p2 + noise.image_noise_px * ImagePoint(Gaussian(rng), Gaussian(rng));
    Eigen::Matrix2d E;
    E << Gaussian(rng), Gaussian(rng), Gaussian(rng), Gaussian(rng);
    affines[i] = ac.A + affine_sigma * E;
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const int num_outliers =
      static_cast<int>(std::floor(n * noise.outlier_ratio));
  out.is_outlier.assign(n, false);
  for (int i = 0; i < num_outliers; ++i) {
    out.is_outlier[order[i]] = true;
    targets[order[i]] = ImagePoint(Uniform(rng, 0.0, scene.width),
                                   Uniform(rng, 0.0, scene.height));
  }

  const int k = noise.pool_k;
  out.pool.k = k;
  out.pool.candidates.resize(n);
  out.labels.resize(n);
  std::bernoulli_distribution top(noise.top_rank_probability);
  std::vector<int> others(n);
  for (int i = 0; i < n; ++i) {
    int true_rank = 0;
    if (k > 1 && !top(rng)) {
      true_rank = std::uniform_int_distribution<int>(1, k - 1)(rng);
    }
    // k - 1 distinct distractor targets by a partial shuffle.
    std::iota(others.begin(), others.end(), 0);
    std::swap(others[i], others[n - 1]);
    for (int j = 0; j < k - 1; ++j) {
      std::swap(others[j],
                others[std::uniform_int_distribution<int>(j, n - 2)(rng)]);
    }
    std::vector<double> scores(k);
    for (int r = 0; r < k; ++r) {
      scores[r] = std::clamp(std::max(0.0, 1.0 - 0.15 * r) + 0.05 * Gaussian(rng),
                             0.0, 1.0);
    }
    std::sort(scores.begin(), scores.end(), std::greater<>());

    auto& list = out.pool.candidates[i];
    list.resize(k);
    out.labels[i].assign(k, false);
    int next_distractor = 0;
    for (int r = 0; r < k; ++r) {
      const int target = r == true_rank ? i : others[next_distractor++];
      list[r].target_index = target;
      list[r].p2 = targets[target];
      list[r].A = affines[target];
      list[r].score = scores[r];
      out.labels[i][r] = target == i && !out.is_outlier[i];
    }
  }
  return out;
}

std::optional<SolverKind> ParseSolverKind(const std::string& name) {
  if (name == "1acg-pose") return SolverKind::kPose1ACG;
  if (name == "1acg-h") return SolverKind::kHomography1ACG;
  if (name == "4pc") return SolverKind::kHomography4PC;
  return std::nullopt;
}

std::string SolverKindName(SolverKind kind) {
  switch (kind) {
    case SolverKind::kPose1ACG: return "1acg-pose";
    case SolverKind::kHomography1ACG: return "1acg-h";
    case SolverKind::kHomography4PC: return "4pc";
  }
  return "";
}

SolverTrial RunSolverTrial(SolverKind solver, const NoiseConfig& noise,
                           uint64_t trial_seed) {
  std::mt19937_64 rng(trial_seed);
  SceneParams params;
  params.num_points = solver == SolverKind::kHomography4PC ? 4 : 1;
  params.planar = solver != SolverKind::kPose1ACG;
  SolverTrial trial;
  try {
    const SyntheticScene scene = GenerateScene(params, rng);
    NoiseConfig n = noise;
    n.pool_k = 1;
    n.outlier_ratio = 0.0;
    const CorruptedScene data = Corrupt(scene, n, rng);
    const auto best = BestCandidateError(
        scene.pose_gt, CandidatePoses(solver, scene, data), TranslationSign::kFolded);
    if (!best) {
      trial.failed = true;
      return trial;
    }
    trial.rotation_deg = best->rotation_deg;
    trial.translation_deg = best->translation_deg;
  } catch (const Error&) {
    trial.failed = true;
  }
  return trial;
}

StabilityReport RunStabilityStudy(SolverKind solver, int trials, uint64_t seed,
                                  int threads) {
  if (trials < 1) throw Error(ErrorKind::kInvalidArgument, "trials must be >= 1");
  StabilityReport report;
  report.trials.resize(trials);
  ParallelFor(trials, threads, [&](int i) {
    report.trials[i] = RunSolverTrial(solver, NoiseConfig{}, TrialSeed(seed, i));
  });

  const double width =
      (StabilityReport::kLogMax - StabilityReport::kLogMin) / StabilityReport::kBins;
  report.bins.resize(StabilityReport::kBins);
  for (int b = 0; b < StabilityReport::kBins; ++b) {
    report.bins[b].lo = StabilityReport::kLogMin + b * width;
    report.bins[b].hi = StabilityReport::kLogMin + (b + 1) * width;
  }
  std::vector<double> log_rot;
  std::vector<double> log_trans;
  for (const auto& t : report.trials) {
    if (t.failed) {
      ++report.failures;
      continue;
    }
    log_rot.push_back(Log10Error(t.rotation_deg));
    log_trans.push_back(Log10Error(t.translation_deg));
    ++report.bins[BinOf(log_rot.back())].count_rotation;
    ++report.bins[BinOf(log_trans.back())].count_translation;
  }
  const std::array<double, 3> qs = {0.5, 0.9, 0.99};
  for (int i = 0; i < 3; ++i) {
    report.rotation_quantiles[i] = Quantile(log_rot, qs[i]);
    report.translation_quantiles[i] = Quantile(log_trans, qs[i]);
  }
  return report;
}

std::vector<NoiseLevelStats> RunNoiseStudy(SolverKind solver,
                                           const std::vector<double>& noise_levels,
                                           int trials, uint64_t seed,
                                           const NoiseStudyOptions& options,
                                           int threads) {
  if (trials < 1) throw Error(ErrorKind::kInvalidArgument, "trials must be >= 1");
  if (!std::is_sorted(noise_levels.begin(), noise_levels.end())) {
    throw Error(ErrorKind::kInvalidArgument, "noise levels must be ascending");
  }
  std::vector<NoiseLevelStats> table;
  for (const double level : noise_levels) {
    NoiseConfig noise;
    noise.image_noise_px = level;
    noise.gravity_noise_deg = options.gravity_noise_deg;
    noise.affine_noise_px = options.affine_noise_px;
    std::vector<SolverTrial> results(trials);
    // Same trial seeds at every level: only the noise magnitude changes.
    ParallelFor(trials, threads, [&](int i) {
      results[i] = RunSolverTrial(solver, noise, TrialSeed(seed, i));
    });
    NoiseLevelStats stats;
    stats.noise_px = level;
    std::vector<double> rot;
    std::vector<double> trans;
    for (const auto& r : results) {
      if (r.failed) {
        ++stats.failures;
        continue;
      }
      rot.push_back(r.rotation_deg);
      trans.push_back(r.translation_deg);
    }
    auto mean_stderr = [](const std::vector<double>& v) {
      if (v.empty()) {
        return std::make_pair(std::numeric_limits<double>::quiet_NaN(),
                              std::numeric_limits<double>::quiet_NaN());
      }
      const double n = static_cast<double>(v.size());
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
      double var = 0.0;
      for (const double x : v) var += (x - mean) * (x - mean);
      var = v.size() > 1 ? var / (n - 1.0) : 0.0;
      return std::make_pair(mean, std::sqrt(var / n));
    };
    std::tie(stats.mean_rotation_deg, stats.stderr_rotation) = mean_stderr(rot);
    std::tie(stats.mean_translation_deg, stats.stderr_translation) =
        mean_stderr(trans);
    table.push_back(stats);
  }
  return table;
}

EndToEndTrial RunEndToEndTrial(const EndToEndOptions& options,
                               uint64_t trial_seed, std::optional<int> truncate_k) {
  std::mt19937_64 rng(trial_seed);
  SceneParams params;
  params.num_points = options.num_points;
  params.planar = options.model == ModelKind::kHomography;
  EndToEndTrial trial;
  SyntheticScene scene;
  try {
    scene = GenerateScene(params, rng);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kGenerationFailure) throw;
    trial.failed = true;
    return trial;
  }

  NoiseConfig noise;
  noise.image_noise_px = options.image_noise_px;
  noise.affine_noise_px = options.affine_noise_px;
  noise.outlier_ratio = options.outlier_ratio;
  noise.pool_k = options.k;
  noise.top_rank_probability = options.top_rank_probability;
  CorruptedScene data = Corrupt(scene, noise, rng);
  data.v1 = PerturbGravity(data.v1, Uniform(rng, 0.0, options.max_gravity_noise_deg), rng);
  data.v2 = PerturbGravity(data.v2, Uniform(rng, 0.0, options.max_gravity_noise_deg), rng);

  CameraSetup cameras{scene.K1, scene.K2, data.v1, data.v2};
  EstimatorConfig config = options.config;
  config.k = truncate_k.value_or(options.k);
  config.record_trace = true;

  const auto start = std::chrono::steady_clock::now();
  std::optional<EstimationResult> result;
  try {
    result = Estimate(data.pool, options.model, cameras, config);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNoModelFound) throw;
  }
  trial.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!result) {
    trial.failed = true;
    return trial;
  }
  trial.inliers = static_cast<int>(result->matches.size());
  trial.iterations = result->iterations_run;
  trial.lo_runs = result->lo_runs;

  // Re-scoring the returned model reproduces the reported score exactly.
  const MatchPool normalized = NormalizePool(data.pool.Truncated(config.k), cameras);
  trial.score_reproducible =
      GuidedMatching(result->model, normalized, CalibratedConfig(config, cameras))
          .score == result->score;
  for (size_t i = 1; i < result->trace.size(); ++i) {
    if (result->trace[i].best_score < result->trace[i - 1].best_score) {
      trial.score_monotone = false;
    }
  }
  if (!result->trace.empty() && result->score < result->trace.back().best_score) {
    trial.score_monotone = false;
  }

  std::vector<RelativePose> poses;
  if (options.model == ModelKind::kEssential) {
    poses.push_back(result->model.pose
                        ? *result->model.pose
                        : DecomposeEssential(result->model.M,
                                             {normalized.source_points[0],
                                              normalized.candidates[0][0].p2}));
  } else {
    for (const auto& d : DecomposeHomography(result->model.M)) poses.push_back(d.pose);
    const Eigen::Matrix3d H_px =
        scene.K2.K() * result->model.M * scene.K1.KInverse();
    const Eigen::Matrix3d H_px_inv = H_px.inverse();
    double total = 0.0;
    int count = 0;
    for (size_t i = 0; i < scene.correspondences.size(); ++i) {
      if (data.is_outlier[i]) continue;
      const auto& ac = scene.correspondences[i];
      try {
        total += HomographyTransferError(ac.p1, ac.p2, H_px, H_px_inv);
      } catch (const Error&) {
        total = std::numeric_limits<double>::infinity();
      }
      ++count;
    }
    trial.transfer_error_px = count > 0 ? total / count : 0.0;
  }
  const auto best = BestCandidateError(
      scene.pose_gt, poses,
      options.model == ModelKind::kEssential ? TranslationSign::kUnsigned
                                             : TranslationSign::kFolded);
  if (!best) {
    trial.failed = true;
    return trial;
  }
  trial.rotation_deg = best->rotation_deg;
  trial.translation_deg = best->translation_deg;
  return trial;
}

std::vector<EndToEndTrial> RunEndToEndStudy(const EndToEndOptions& options,
                                            int trials, uint64_t seed,
                                            int threads) {
  if (trials < 1) throw Error(ErrorKind::kInvalidArgument, "trials must be >= 1");
  std::vector<EndToEndTrial> out(trials);
  ParallelFor(trials, threads, [&](int i) {
    out[i] = RunEndToEndTrial(options, TrialSeed(seed, i));
  });
  return out;
}

}  // namespace affineglue
