#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "affineglue/geometry.h"
#include "affineglue/grid_index.h"
#include "affineglue/scoring.h"

namespace affineglue {

struct MatchCandidate {
  int target_index = 0;
  ImagePoint p2 = ImagePoint::Zero();
  // Absent for point-only candidates, which are never used as samples.
  std::optional<Eigen::Matrix2d> A;
  // Matching prior in [0, 1]; each source's list is sorted by it, descending.
  double score = 0.0;
};

// One-to-many tentative matches: for every source point, its k best
// candidates in the destination image.
struct MatchPool {
  std::vector<ImagePoint> source_points;
  std::vector<std::vector<MatchCandidate>> candidates;
  int k = 1;

  size_t TotalCandidates() const;
  // Throws kInvalidArgument when an invariant is violated.
  void Validate() const;
  // Keeps the first `k` candidates of every source.
  MatchPool Truncated(int k) const;
};

struct EstimatorConfig {
  double epsilon = 2.0;  // inlier threshold
  double mu = 0.7;       // ratio filter on matcher scores
  int k = 5;
  int max_iterations = 1000;
  double confidence = 0.999;
  int lo_inner_iterations = 20;
  uint64_t seed = 0;
  ScoringKind scoring = ScoringKind::kTruncatedQuadratic;
  // MagsacLike noise ceiling; 0 selects epsilon / kMagsacCutoffQuantile.
  double sigma_max = 0.0;
  bool use_hashing = true;
  bool record_trace = false;

  double EffectiveSigmaMax() const;
  // Throws kInvalidArgument.
  void Validate() const;
};

struct FinalMatch {
  int source_index = 0;
  int candidate_rank = 0;  // position in the source's candidate list
  int target_index = 0;
  double residual = 0.0;
};

struct GuidedMatchingResult {
  std::vector<FinalMatch> matches;  // sorted by source index
  double score = 0.0;
};

struct TraceEntry {
  int sample_index = 0;
  double best_score = 0.0;
};

struct EstimationResult {
  ModelHypothesis model;
  std::vector<FinalMatch> matches;
  double score = 0.0;
  int iterations_run = 0;
  int lo_runs = 0;
  std::vector<TraceEntry> trace;
};

// Global candidate order by prior, descending; ties by source index, then
// target index.
class CandidateOrder {
 public:
  explicit CandidateOrder(const MatchPool& pool);

  size_t size() const { return order_.size(); }
  // (source index, candidate rank). Throws kPoolExhausted.
  std::pair<int, int> At(size_t iteration) const;

 private:
  std::vector<std::pair<int, int>> order_;
};

// Returns the iteration-th best candidate. Throws kPoolExhausted.
std::pair<int, MatchCandidate> NextBestMatch(const MatchPool& pool,
                                             size_t iteration);

// Point-to-model residual: Sampson distance for essential matrices, symmetric
// transfer error for homographies. Infinite when undefined.
double ModelResidual(const ModelHypothesis& model, const ImagePoint& p1,
                     const ImagePoint& p2);

// Candidate ranks of `source` whose destination cell can hold a match within
// `radius` of the transferred point (3x3 cell neighborhood).
std::vector<int> HashCandidatesHomography(const ModelHypothesis& model,
                                          const MatchPool& pool, int source,
                                          const GridIndex& grid, double radius);

// Candidate ranks of `source` whose destination cell intersects the band
// around the epipolar line that can contain Sampson distances below epsilon.
// Falls back to every candidate when p1 sits at the epipole.
std::vector<int> HashCandidatesEpipolar(const ModelHypothesis& model,
                                        const MatchPool& pool, int source,
                                        const GridIndex& grid, double epsilon);

// Guided matching against a fixed pool. Residuals and epsilon share the
// pool's coordinate units.
class GuidedMatcher {
 public:
  GuidedMatcher(const MatchPool& pool, const EstimatorConfig& config);

  GuidedMatchingResult Match(const ModelHypothesis& model) const;

  const MatchPool& pool() const { return pool_; }
  const EstimatorConfig& config() const { return config_; }
  // |K'(p1)|^-1 for every source.
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<int> Subset(const ModelHypothesis& model, int source) const;

  const MatchPool& pool_;
  EstimatorConfig config_;
  std::vector<std::vector<int>> filtered_;  // K'(p1) as candidate ranks
  std::vector<double> weights_;
  std::optional<GridIndex> grid_;
};

GuidedMatchingResult GuidedMatching(const ModelHypothesis& model,
                                    const MatchPool& pool,
                                    const EstimatorConfig& config);

struct LocalOptimizationResult {
  ModelHypothesis model;
  GuidedMatchingResult matching;
  bool improved = false;
};

// Inner RANSAC on the current matches with a point-only solver (8-point for
// essential, 4-point DLT for homographies), then nonlinear refinement. The
// returned score never falls below `current.score`.
LocalOptimizationResult LocalOptimization(const ModelHypothesis& model,
                                          const GuidedMatchingResult& current,
                                          const GuidedMatcher& matcher,
                                          std::mt19937_64& rng);

// Convenience overload that scores `model` first.
LocalOptimizationResult LocalOptimization(const ModelHypothesis& model,
                                          const MatchPool& pool,
                                          const EstimatorConfig& config,
                                          std::mt19937_64& rng);

int RefitSampleSize(ModelKind kind);

struct CameraSetup {
  CameraIntrinsics K1 = CameraIntrinsics::FromFocal(1.0);
  CameraIntrinsics K2 = CameraIntrinsics::FromFocal(1.0);
  GravityDirection v1 = GravityDirection::Down();
  GravityDirection v2 = GravityDirection::Down();

  // Mean focal length of both cameras, converting pixel thresholds.
  double ThresholdScale() const;
};

// Converts a pixel-space pool to calibrated coordinates. Candidates whose
// affine frame cannot be normalized become point-only.
MatchPool NormalizePool(const MatchPool& pool, const CameraSetup& cameras);

// Joint matching and estimation from a one-to-many pool given in pixels.
// The result model, residuals and score live in calibrated coordinates.
// Throws kNoModelFound.
EstimationResult Estimate(const MatchPool& pool, ModelKind kind,
                          const CameraSetup& cameras,
                          const EstimatorConfig& config);

// Config with epsilon and sigma_max converted to calibrated units.
EstimatorConfig CalibratedConfig(const EstimatorConfig& config,
                                 const CameraSetup& cameras);

}  // namespace affineglue
