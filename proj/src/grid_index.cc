#include "affineglue/grid_index.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "affineglue/errors.h"

namespace affineglue {

GridIndex::GridIndex(const std::vector<Eigen::Vector2d>& points,
                     double cell_size)
    : origin_(Eigen::Vector2d::Zero()), cell_size_(cell_size), cols_(1), rows_(1) {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
    throw Error(ErrorKind::kInvalidArgument, "cell size must be positive");
  }
  if (points.empty()) return;
  Eigen::Vector2d lo = points.front();
  Eigen::Vector2d hi = points.front();
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  origin_ = lo;
  const Eigen::Vector2d extent = hi - lo;
  cols_ = static_cast<int64_t>(std::floor(extent.x() / cell_size_)) + 1;
  rows_ = static_cast<int64_t>(std::floor(extent.y() / cell_size_)) + 1;
}

GridIndex::Cell GridIndex::CellOf(const Eigen::Vector2d& p) const {
  // Clamp far-away coordinates so the cast stays defined; anything this far
  // out is outside the grid either way.
  constexpr double kLimit = 1e15;
  const double cu = std::clamp(std::floor((p.x() - origin_.x()) / cell_size_),
                               -kLimit, kLimit);
  const double cv = std::clamp(std::floor((p.y() - origin_.y()) / cell_size_),
                               -kLimit, kLimit);
  return {static_cast<int64_t>(cu), static_cast<int64_t>(cv)};
}

bool GridIndex::Contains(const Cell& cell) const {
  return cell.col >= 0 && cell.row >= 0 && cell.col < cols_ && cell.row < rows_;
}

Eigen::Vector2d GridIndex::CellMin(const Cell& cell) const {
  return origin_ + cell_size_ * Eigen::Vector2d(static_cast<double>(cell.col),
                                                static_cast<double>(cell.row));
}

Eigen::Vector2d GridIndex::CellMax(const Cell& cell) const {
  return CellMin(cell) + Eigen::Vector2d::Constant(cell_size_);
}

double GridIndex::MaxHomogeneousNorm() const {
  const Eigen::Vector2d hi =
      origin_ + cell_size_ * Eigen::Vector2d(static_cast<double>(cols_),
                                             static_cast<double>(rows_));
  const double u = std::max(std::abs(origin_.x()), std::abs(hi.x()));
  const double v = std::max(std::abs(origin_.y()), std::abs(hi.y()));
  return std::sqrt(u * u + v * v + 1.0);
}

bool GridIndex::CellIntersectsBand(const Cell& cell, const Eigen::Vector3d& line,
                                   double half_width) const {
  const double norm = line.head<2>().norm();
  if (!(norm > 0.0)) return true;
  const Eigen::Vector2d lo = CellMin(cell);
  const Eigen::Vector2d hi = CellMax(cell);
  double min_d = std::numeric_limits<double>::infinity();
  double max_d = -std::numeric_limits<double>::infinity();
  for (const double u : {lo.x(), hi.x()}) {
    for (const double v : {lo.y(), hi.y()}) {
      const double d = (line.x() * u + line.y() * v + line.z()) / norm;
      min_d = std::min(min_d, d);
      max_d = std::max(max_d, d);
    }
  }
  return min_d <= half_width && max_d >= -half_width;
}

}  // namespace affineglue
