#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "affineglue/errors.h"
#include "affineglue/solvers.h"

namespace affineglue {
namespace {

// Similarity moving the centroid to the origin with mean distance sqrt(2).
Eigen::Matrix3d HartleyTransform(const std::vector<ImagePoint>& points) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  double mean_dist = 0.0;
  for (const auto& p : points) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(points.size());
  if (!(mean_dist > 0.0)) {
    throw Error(ErrorKind::kDegenerateConfiguration, "coincident points");
  }
  const double s = std::sqrt(2.0) / mean_dist;
  Eigen::Matrix3d T;
  T << s, 0.0, -s * centroid.x(), 0.0, s, -s * centroid.y(), 0.0, 0.0, 1.0;
  return T;
}

struct NormalizedPairs {
  Eigen::Matrix3d T1;
  Eigen::Matrix3d T2;
  std::vector<Eigen::Vector3d> x1;
  std::vector<Eigen::Vector3d> x2;
};

NormalizedPairs NormalizePairs(const std::vector<PointPair>& matches) {
  std::vector<ImagePoint> p1;
  std::vector<ImagePoint> p2;
  p1.reserve(matches.size());
  p2.reserve(matches.size());
  for (const auto& m : matches) {
    p1.push_back(m.p1);
    p2.push_back(m.p2);
  }
  NormalizedPairs out;
  out.T1 = HartleyTransform(p1);
  out.T2 = HartleyTransform(p2);
  for (size_t i = 0; i < matches.size(); ++i) {
    out.x1.push_back(out.T1 * Homogeneous(p1[i]));
    out.x2.push_back(out.T2 * Homogeneous(p2[i]));
  }
  return out;
}

// Null vector of a stacked system with at least 9 rows (zero-padded).
struct NullSpace {
  Eigen::Matrix<double, 9, 1> vector;
  Eigen::Matrix<double, 9, 1> singular_values;
};

NullSpace SolveNullSpace(const Eigen::MatrixXd& system) {
  Eigen::MatrixXd padded = system;
  if (padded.rows() < 9) {
    padded.conservativeResize(9, 9);
    padded.bottomRows(9 - system.rows()).setZero();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(padded, Eigen::ComputeFullV);
  NullSpace out;
  out.vector = svd.matrixV().col(8);
  out.singular_values = svd.singularValues();
  return out;
}

Eigen::Matrix3d HomographyDLT(const std::vector<PointPair>& matches,
                              bool minimal) {
  const NormalizedPairs n = NormalizePairs(matches);
  Eigen::MatrixXd system(2 * matches.size(), 9);
  for (size_t i = 0; i < matches.size(); ++i) {
    const Eigen::Vector3d x = n.x1[i] / n.x1[i].z();
    const Eigen::Vector3d y = n.x2[i] / n.x2[i].z();
    system.row(2 * i) << 0.0, 0.0, 0.0, -x.x(), -x.y(), -1.0, y.y() * x.x(),
        y.y() * x.y(), y.y();
    system.row(2 * i + 1) << x.x(), x.y(), 1.0, 0.0, 0.0, 0.0, -y.x() * x.x(),
        -y.x() * x.y(), -y.x();
  }
  const NullSpace ns = SolveNullSpace(system);
  const auto& s = ns.singular_values;
  // The remaining eight constraints must be independent: the second-smallest
  // singular value has to stand clear of the smallest.
  const bool degenerate =
      s(7) < 1e-8 * s(0) || (minimal && s(7) < 1e3 * s(8));
  if (degenerate) {
    throw Error(ErrorKind::kDegenerateConfiguration,
                "DLT system is rank deficient");
  }
  Eigen::Matrix3d Hn;
  Hn << ns.vector(0), ns.vector(1), ns.vector(2), ns.vector(3), ns.vector(4),
      ns.vector(5), ns.vector(6), ns.vector(7), ns.vector(8);
  return n.T2.inverse() * Hn * n.T1;
}

}  // namespace

ModelHypothesis SolveHomography4PC(const std::array<PointPair, 4>& matches) {
  const std::vector<PointPair> pairs(matches.begin(), matches.end());
  return ModelHypothesis::Homography(HomographyDLT(pairs, /*minimal=*/true));
}

ModelHypothesis FitHomographyDLT(const std::vector<PointPair>& matches) {
  if (matches.size() < 4) {
    throw Error(ErrorKind::kDegenerateConfiguration,
                "homography needs at least four pairs");
  }
  return ModelHypothesis::Homography(
      HomographyDLT(matches, /*minimal=*/matches.size() == 4));
}

ModelHypothesis RefitEssential8pt(const std::vector<PointPair>& matches) {
  if (matches.size() < 8) {
    throw Error(ErrorKind::kDegenerateConfiguration,
                "eight-point fit needs at least eight pairs");
  }
  const NormalizedPairs n = NormalizePairs(matches);
  Eigen::MatrixXd system(matches.size(), 9);
  for (size_t i = 0; i < matches.size(); ++i) {
    const Eigen::Vector3d& a = n.x1[i];
    const Eigen::Vector3d& b = n.x2[i];
    system.row(i) << b.x() * a.x(), b.x() * a.y(), b.x() * a.z(),
        b.y() * a.x(), b.y() * a.y(), b.y() * a.z(), b.z() * a.x(),
        b.z() * a.y(), b.z() * a.z();
  }
  const NullSpace ns = SolveNullSpace(system);
  if (ns.singular_values(7) < 1e-10 * ns.singular_values(0)) {
    throw Error(ErrorKind::kDegenerateConfiguration,
                "epipolar system is rank deficient");
  }
  Eigen::Matrix3d Fn;
  Fn << ns.vector(0), ns.vector(1), ns.vector(2), ns.vector(3), ns.vector(4),
      ns.vector(5), ns.vector(6), ns.vector(7), ns.vector(8);
  const Eigen::Matrix3d E = ProjectToEssential(n.T2.transpose() * Fn * n.T1);
  const RelativePose pose = DecomposeEssentialByVote(E, matches);
  return ModelHypothesis::Essential(ComposeEssential(pose), pose);
}

}  // namespace affineglue
