#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <Eigen/Dense>

#include "affineglue/errors.h"
#include "affineglue/estimator.h"

namespace affineglue {
namespace {

// Margin applied to hashing bounds so that rounding never drops a candidate
// the unhashed matcher would accept.
constexpr double kHashSlack = 1.0 + 1e-9;

}  // namespace

size_t MatchPool::TotalCandidates() const {
  size_t total = 0;
  for (const auto& list : candidates) total += list.size();
  return total;
}

void MatchPool::Validate() const {
  if (candidates.size() != source_points.size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "candidate lists do not match source points");
  }
  if (k < 1) throw Error(ErrorKind::kInvalidArgument, "k must be positive");
  for (size_t i = 0; i < candidates.size(); ++i) {
    const auto& list = candidates[i];
    if (!source_points[i].allFinite()) {
      throw Error(ErrorKind::kInvalidArgument, "non-finite source point");
    }
    if (list.empty() || static_cast<int>(list.size()) > k) {
      throw Error(ErrorKind::kInvalidArgument,
                  "source " + std::to_string(i) + " has " +
                      std::to_string(list.size()) + " candidates, expected 1.." +
                      std::to_string(k));
    }
    for (size_t j = 0; j < list.size(); ++j) {
      const auto& c = list[j];
      if (c.target_index < 0 || !c.p2.allFinite() || !std::isfinite(c.score)) {
        throw Error(ErrorKind::kInvalidArgument, "invalid candidate");
      }
      if (j > 0 && c.score > list[j - 1].score) {
        throw Error(ErrorKind::kInvalidArgument,
                    "candidates must be sorted by descending score");
      }
    }
  }
}

MatchPool MatchPool::Truncated(int new_k) const {
  MatchPool out;
  out.source_points = source_points;
  out.k = new_k;
  out.candidates.reserve(candidates.size());
  for (const auto& list : candidates) {
    const size_t n = std::min(list.size(), static_cast<size_t>(new_k));
    out.candidates.emplace_back(list.begin(), list.begin() + n);
  }
  return out;
}

CandidateOrder::CandidateOrder(const MatchPool& pool) {
  order_.reserve(pool.TotalCandidates());
  for (size_t s = 0; s < pool.candidates.size(); ++s) {
    for (size_t r = 0; r < pool.candidates[s].size(); ++r) {
      order_.emplace_back(static_cast<int>(s), static_cast<int>(r));
    }
  }
  std::stable_sort(order_.begin(), order_.end(),
                   [&pool](const auto& a, const auto& b) {
                     const MatchCandidate& ca = pool.candidates[a.first][a.second];
                     const MatchCandidate& cb = pool.candidates[b.first][b.second];
                     if (ca.score != cb.score) return ca.score > cb.score;
                     if (a.first != b.first) return a.first < b.first;
                     return ca.target_index < cb.target_index;
                   });
}

std::pair<int, int> CandidateOrder::At(size_t iteration) const {
  if (iteration >= order_.size()) {
    throw Error(ErrorKind::kPoolExhausted,
                "all " + std::to_string(order_.size()) + " candidates used");
  }
  return order_[iteration];
}

std::pair<int, MatchCandidate> NextBestMatch(const MatchPool& pool,
                                             size_t iteration) {
  const auto [source, rank] = CandidateOrder(pool).At(iteration);
  return {source, pool.candidates[source][rank]};
}

double ModelResidual(const ModelHypothesis& model, const ImagePoint& p1,
                     const ImagePoint& p2) {
  try {
    if (model.kind == ModelKind::kEssential) {
      return SampsonDistance(p1, p2, model.M);
    }
    return HomographyTransferError(p1, p2, model.M);
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

std::vector<int> HashCandidatesHomography(const ModelHypothesis& model,
                                          const MatchPool& pool, int source,
                                          const GridIndex& grid, double radius) {
  std::vector<int> out;
  ImagePoint predicted;
  try {
    predicted = TransferPoint(model.M, pool.source_points[source]);
  } catch (const Error&) {
    return out;
  }
  if (!predicted.allFinite() || grid.cell_size() < radius) return out;
  const GridIndex::Cell center = grid.CellOf(predicted);
  const auto& list = pool.candidates[source];
  for (size_t r = 0; r < list.size(); ++r) {
    const GridIndex::Cell c = grid.CellOf(list[r].p2);
    if (std::abs(c.col - center.col) <= 1 && std::abs(c.row - center.row) <= 1) {
      out.push_back(static_cast<int>(r));
    }
  }
  return out;
}

std::vector<int> HashCandidatesEpipolar(const ModelHypothesis& model,
                                        const MatchPool& pool, int source,
                                        const GridIndex& grid, double epsilon) {
  const auto& list = pool.candidates[source];
  std::vector<int> out;
  const Eigen::Vector3d line = model.M * Homogeneous(pool.source_points[source]);
  const double n2 = line.head<2>().norm();
  if (!(n2 > 1e-12 * model.M.norm())) {
    out.resize(list.size());
    std::iota(out.begin(), out.end(), 0);
    return out;
  }
  // Sampson < eps bounds the distance to the line in image 2 by
  // eps * sqrt(1 + |n1|^2 / |n2|^2), with |n1| bounded over the grid box.
  const double n1_max =
      model.M.leftCols<2>().norm() * grid.MaxHomogeneousNorm();
  const double ratio = n1_max / n2;
  const double half_width = epsilon * std::sqrt(1.0 + ratio * ratio) * kHashSlack;
  for (size_t r = 0; r < list.size(); ++r) {
    if (grid.CellIntersectsBand(grid.CellOf(list[r].p2), line, half_width)) {
      out.push_back(static_cast<int>(r));
    }
  }
  return out;
}

GuidedMatcher::GuidedMatcher(const MatchPool& pool, const EstimatorConfig& config)
    : pool_(pool), config_(config) {
  const size_t n = pool.source_points.size();
  filtered_.resize(n);
  weights_.assign(n, 0.0);
  for (size_t s = 0; s < n; ++s) {
    const auto& list = pool.candidates[s];
    if (list.empty()) continue;
    double max_score = -std::numeric_limits<double>::infinity();
    for (const auto& c : list) max_score = std::max(max_score, c.score);
    for (size_t r = 0; r < list.size(); ++r) {
      if (list[r].score >= config.mu * max_score) {
        filtered_[s].push_back(static_cast<int>(r));
      }
    }
    weights_[s] = 1.0 / static_cast<double>(filtered_[s].size());
  }
  if (config.use_hashing) {
    std::vector<Eigen::Vector2d> targets;
    for (const auto& list : pool.candidates) {
      for (const auto& c : list) targets.push_back(c.p2);
    }
    grid_.emplace(targets, std::sqrt(2.0) * config.epsilon * kHashSlack);
  }
}

std::vector<int> GuidedMatcher::Subset(const ModelHypothesis& model,
                                       int source) const {
  const std::vector<int>& allowed = filtered_[source];
  if (!grid_) return allowed;
  const std::vector<int> hashed =
      model.kind == ModelKind::kHomography
          ? HashCandidatesHomography(model, pool_, source, *grid_,
                                     std::sqrt(2.0) * config_.epsilon)
          : HashCandidatesEpipolar(model, pool_, source, *grid_,
                                   config_.epsilon);
  std::vector<int> out;
  std::set_intersection(allowed.begin(), allowed.end(), hashed.begin(),
                        hashed.end(), std::back_inserter(out));
  return out;
}

GuidedMatchingResult GuidedMatcher::Match(const ModelHypothesis& model) const {
  struct Option {
    double residual;
    int rank;
    int target;
  };
  const int n = static_cast<int>(pool_.source_points.size());
  std::vector<std::vector<Option>> options(n);
  const double sigma_max = config_.EffectiveSigmaMax();

  Eigen::Matrix3d M_inv;
  if (model.kind == ModelKind::kHomography) M_inv = model.M.inverse();

  for (int s = 0; s < n; ++s) {
    const ImagePoint& p1 = pool_.source_points[s];
    for (const int r : Subset(model, s)) {
      const MatchCandidate& c = pool_.candidates[s][r];
      double residual;
      try {
        residual = model.kind == ModelKind::kEssential
                       ? SampsonDistance(p1, c.p2, model.M)
                       : HomographyTransferError(p1, c.p2, model.M, M_inv);
      } catch (const Error&) {
        continue;
      }
      if (residual < config_.epsilon) {
        options[s].push_back({residual, r, c.target_index});
      }
    }
    std::sort(options[s].begin(), options[s].end(),
              [](const Option& a, const Option& b) {
                if (a.residual != b.residual) return a.residual < b.residual;
                return a.rank < b.rank;
              });
  }

  // Each source takes its lowest-residual option; a target claimed twice goes
  // to the lower residual (then lower source index) and the others move on.
  std::vector<int> pointer(n, 0);
  for (;;) {
    std::map<int, int> winner;
    for (int s = 0; s < n; ++s) {
      if (pointer[s] >= static_cast<int>(options[s].size())) continue;
      const Option& o = options[s][pointer[s]];
      auto [it, inserted] = winner.emplace(o.target, s);
      if (!inserted) {
        const Option& held = options[it->second][pointer[it->second]];
        if (o.residual < held.residual) it->second = s;
      }
    }
    bool changed = false;
    for (int s = 0; s < n; ++s) {
      if (pointer[s] >= static_cast<int>(options[s].size())) continue;
      if (winner.at(options[s][pointer[s]].target) != s) {
        ++pointer[s];
        changed = true;
      }
    }
    if (!changed) break;
  }

  GuidedMatchingResult result;
  for (int s = 0; s < n; ++s) {
    if (pointer[s] >= static_cast<int>(options[s].size())) continue;
    const Option& o = options[s][pointer[s]];
    result.matches.push_back({s, o.rank, o.target, o.residual});
    result.score += weights_[s] * ScoreGain(o.residual, config_.scoring,
                                            config_.epsilon, sigma_max);
  }
  return result;
}

GuidedMatchingResult GuidedMatching(const ModelHypothesis& model,
                                    const MatchPool& pool,
                                    const EstimatorConfig& config) {
  return GuidedMatcher(pool, config).Match(model);
}

}  // namespace affineglue
