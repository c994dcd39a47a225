#include "affineglue/estimator.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "affineglue/errors.h"
#include "affineglue/solvers.h"

namespace affineglue {
namespace {

constexpr int kMinIterations = 20;

std::vector<PointPair> MatchedPairs(const MatchPool& pool,
                                    const std::vector<FinalMatch>& matches) {
  std::vector<PointPair> pairs;
  pairs.reserve(matches.size());
  for (const auto& m : matches) {
    pairs.push_back({pool.source_points[m.source_index],
                     pool.candidates[m.source_index][m.candidate_rank].p2});
  }
  return pairs;
}

// Distinct indices in [0, n), drawn by a partial Fisher-Yates shuffle.
std::vector<int> SampleIndices(int n, int count, std::mt19937_64& rng) {
  std::vector<int> pool(n);
  for (int i = 0; i < n; ++i) pool[i] = i;
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<int> dist(i, n - 1);
    std::swap(pool[i], pool[dist(rng)]);
  }
  pool.resize(count);
  return pool;
}

std::optional<ModelHypothesis> FitPointModel(
    ModelKind kind, const std::vector<PointPair>& sample) {
  try {
    if (kind == ModelKind::kEssential) return RefitEssential8pt(sample);
    std::array<PointPair, 4> four;
    std::copy_n(sample.begin(), 4, four.begin());
    return SolveHomography4PC(four);
  } catch (const Error&) {
    return std::nullopt;
  }
}

// Iterations needed to draw one all-inlier single-correspondence sample with
// the requested confidence.
double RequiredIterations(double inlier_ratio, double confidence) {
  if (inlier_ratio >= 1.0) return 0.0;
  if (inlier_ratio <= 0.0) return std::numeric_limits<double>::infinity();
  return std::log(1.0 - confidence) / std::log(1.0 - inlier_ratio);
}

int LoBudget(int max_iterations) {
  return static_cast<int>(std::ceil(std::log2(static_cast<double>(max_iterations))));
}

}  // namespace

double EstimatorConfig::EffectiveSigmaMax() const {
  return sigma_max > 0.0 ? sigma_max : epsilon / kMagsacCutoffQuantile;
}

void EstimatorConfig::Validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorKind::kInvalidArgument, what);
  };
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) fail("epsilon must be > 0");
  if (!(mu >= 0.0 && mu <= 1.0)) fail("mu must lie in [0, 1]");
  if (k < 1) fail("k must be >= 1");
  if (max_iterations < 1) fail("max_iterations must be >= 1");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    fail("confidence must lie in (0, 1)");
  }
  if (lo_inner_iterations < 1) fail("lo_inner_iterations must be >= 1");
  if (sigma_max < 0.0 || !std::isfinite(sigma_max)) {
    fail("sigma_max must be >= 0");
  }
}

int RefitSampleSize(ModelKind kind) {
  return kind == ModelKind::kEssential ? 8 : 4;
}

double CameraSetup::ThresholdScale() const {
  return 0.5 * (K1.MeanFocal() + K2.MeanFocal());
}

EstimatorConfig CalibratedConfig(const EstimatorConfig& config,
                                 const CameraSetup& cameras) {
  EstimatorConfig out = config;
  const double scale = cameras.ThresholdScale();
  out.sigma_max = config.EffectiveSigmaMax() / scale;
  out.epsilon = config.epsilon / scale;
  return out;
}

MatchPool NormalizePool(const MatchPool& pool, const CameraSetup& cameras) {
  MatchPool out;
  out.k = pool.k;
  out.source_points.reserve(pool.source_points.size());
  for (const auto& p : pool.source_points) {
    out.source_points.push_back(NormalizePoint(p, cameras.K1));
  }
  out.candidates.reserve(pool.candidates.size());
  for (const auto& list : pool.candidates) {
    std::vector<MatchCandidate> normalized;
    normalized.reserve(list.size());
    for (const auto& c : list) {
      MatchCandidate n = c;
      n.p2 = NormalizePoint(c.p2, cameras.K2);
      if (c.A) {
        try {
          n.A = NormalizeAffine(*c.A, cameras.K1, cameras.K2);
        } catch (const Error&) {
          n.A.reset();
        }
      }
      normalized.push_back(std::move(n));
    }
    out.candidates.push_back(std::move(normalized));
  }
  return out;
}

LocalOptimizationResult LocalOptimization(const ModelHypothesis& model,
                                          const GuidedMatchingResult& current,
                                          const GuidedMatcher& matcher,
                                          std::mt19937_64& rng) {
  LocalOptimizationResult best{model, current, false};
  const int sample_size = RefitSampleSize(model.kind);
  if (static_cast<int>(current.matches.size()) < sample_size) return best;

  const MatchPool& pool = matcher.pool();
  for (int it = 0; it < matcher.config().lo_inner_iterations; ++it) {
    const std::vector<PointPair> inliers =
        MatchedPairs(pool, best.matching.matches);
    const int n = static_cast<int>(inliers.size());
    if (n < sample_size) break;
    std::vector<PointPair> sample;
    for (const int i : SampleIndices(n, sample_size, rng)) {
      sample.push_back(inliers[i]);
    }
    const auto fitted = FitPointModel(model.kind, sample);
    if (!fitted) continue;
    GuidedMatchingResult matching = matcher.Match(*fitted);
    if (matching.score > best.matching.score) {
      best = {*fitted, std::move(matching), true};
    }
  }

  const std::vector<PointPair> inliers =
      MatchedPairs(pool, best.matching.matches);
  if (static_cast<int>(inliers.size()) >= sample_size) {
    ModelHypothesis refined = RefinePoseNonlinear(best.model, inliers);
    GuidedMatchingResult matching = matcher.Match(refined);
    if (matching.score > best.matching.score) {
      best = {std::move(refined), std::move(matching), true};
    }
  }
  return best;
}

LocalOptimizationResult LocalOptimization(const ModelHypothesis& model,
                                          const MatchPool& pool,
                                          const EstimatorConfig& config,
                                          std::mt19937_64& rng) {
  const GuidedMatcher matcher(pool, config);
  return LocalOptimization(model, matcher.Match(model), matcher, rng);
}

EstimationResult Estimate(const MatchPool& input_pool, ModelKind kind,
                          const CameraSetup& cameras,
                          const EstimatorConfig& config) {
  config.Validate();
  input_pool.Validate();
  if (input_pool.source_points.empty()) {
    throw Error(ErrorKind::kNoModelFound, "empty pool");
  }
  const MatchPool pool =
      NormalizePool(input_pool.Truncated(std::min(config.k, input_pool.k)),
                    cameras);
  const EstimatorConfig calibrated = CalibratedConfig(config, cameras);
  const GuidedMatcher matcher(pool, calibrated);
  const CandidateOrder order(pool);
  std::mt19937_64 rng(config.seed);

  struct State {
    ModelHypothesis model;
    GuidedMatchingResult matching;
  };
  std::optional<State> best;
  const int lo_budget = LoBudget(config.max_iterations);
  const int sample_size = RefitSampleSize(kind);
  const double num_sources = static_cast<double>(pool.source_points.size());

  EstimationResult result;
  for (int t = 0; t < config.max_iterations; ++t) {
    if (static_cast<size_t>(t) >= order.size()) break;
    const auto [source, rank] = order.At(t);
    result.iterations_run = t + 1;
    const MatchCandidate& candidate = pool.candidates[source][rank];

    std::optional<State> iteration_best;
    if (candidate.A) {
      const AffineCorrespondence ac{pool.source_points[source], candidate.p2,
                                    *candidate.A};
      std::vector<ModelHypothesis> hypotheses;
      try {
        if (kind == ModelKind::kEssential) {
          for (const auto& pose :
               SolvePose1ACGravity(ac, cameras.v1, cameras.v2).poses) {
            if (!PassesCheirality(pose, ac.p1, ac.p2)) continue;
            hypotheses.push_back(
                ModelHypothesis::Essential(ComposeEssential(pose), pose));
          }
        } else {
          hypotheses =
              SolveHomography1ACGravity(ac, cameras.v1, cameras.v2).homographies;
        }
      } catch (const Error&) {
        hypotheses.clear();
      }
      for (const auto& hypothesis : hypotheses) {
        // A minimal solver has to fit its own sample.
        if (!(ModelResidual(hypothesis, ac.p1, ac.p2) < calibrated.epsilon)) {
          continue;
        }
        GuidedMatchingResult matching = matcher.Match(hypothesis);
        if (!iteration_best || matching.score > iteration_best->matching.score) {
          iteration_best = State{hypothesis, std::move(matching)};
        }
      }
    }

    if (iteration_best &&
        (!best || iteration_best->matching.score > best->matching.score)) {
      if (result.lo_runs < lo_budget) {
        LocalOptimizationResult lo = LocalOptimization(
            iteration_best->model, iteration_best->matching, matcher, rng);
        ++result.lo_runs;
        best = State{std::move(lo.model), std::move(lo.matching)};
      } else {
        best = std::move(iteration_best);
      }
    }
    if (config.record_trace) {
      result.trace.push_back({t, best ? best->matching.score : 0.0});
    }

    const double inlier_ratio =
        best ? static_cast<double>(best->matching.matches.size()) / num_sources
             : 0.0;
    const double needed = std::max(
        static_cast<double>(kMinIterations),
        RequiredIterations(inlier_ratio, config.confidence));
    if (static_cast<double>(t + 1) >= needed) break;
  }

  if (best) {
    LocalOptimizationResult lo =
        LocalOptimization(best->model, best->matching, matcher, rng);
    ++result.lo_runs;
    best = State{std::move(lo.model), std::move(lo.matching)};
  }
  if (!best || static_cast<int>(best->matching.matches.size()) < sample_size) {
    throw Error(ErrorKind::kNoModelFound,
                "no hypothesis reached " + std::to_string(sample_size) +
                    " finalized matches");
  }
  result.model = std::move(best->model);
  result.matches = std::move(best->matching.matches);
  result.score = best->matching.score;
  return result;
}

}  // namespace affineglue
