#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace affineglue {

// Regular grid over the bounding box of a destination point set. Cells are
// addressed by signed integer coordinates so queries outside the box stay
// well defined.
class GridIndex {
 public:
  struct Cell {
    int64_t col = 0;
    int64_t row = 0;
    bool operator==(const Cell&) const = default;
  };

  GridIndex(const std::vector<Eigen::Vector2d>& points, double cell_size);

  double cell_size() const { return cell_size_; }
  int64_t cols() const { return cols_; }
  int64_t rows() const { return rows_; }
  const Eigen::Vector2d& origin() const { return origin_; }

  Cell CellOf(const Eigen::Vector2d& p) const;
  bool Contains(const Cell& cell) const;
  // Corners of the cell rectangle: min corner and max corner.
  Eigen::Vector2d CellMin(const Cell& cell) const;
  Eigen::Vector2d CellMax(const Cell& cell) const;

  // Largest norm of (u, v, 1) over the grid rectangle.
  double MaxHomogeneousNorm() const;

  // True when the cell rectangle meets the band |l . (u, v, 1)| / |l[0:2]| <=
  // half_width around the line l.
  bool CellIntersectsBand(const Cell& cell, const Eigen::Vector3d& line,
                          double half_width) const;

 private:
  Eigen::Vector2d origin_;
  double cell_size_;
  int64_t cols_;
  int64_t rows_;
};

}  // namespace affineglue
