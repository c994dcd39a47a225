#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "affineglue/errors.h"
#include "affineglue/solvers.h"

namespace affineglue {
namespace {

// Relative gap between the two smallest singular values of M(x) below which
// the kernel direction is considered undetermined.
constexpr double kKernelGapTol = 1e-10;
// A root is accepted only when M(x) is numerically singular.
constexpr double kKernelResidualTol = 1e-8;

// (1 + x^2) R_y(x); every entry is a polynomial of degree <= 2.
Eigen::Matrix3d ScaledRotationAboutY(double x) {
  const double x2 = x * x;
  Eigen::Matrix3d m;
  m << 1.0 - x2, 0.0, -2.0 * x,  //
      0.0, 1.0 + x2, 0.0,         //
      2.0 * x, 0.0, 1.0 - x2;
  return m;
}

// M for a rotation about y given as a possibly scaled matrix; linear in Ry.
Eigen::Matrix3d ConstraintMatrix(const GravityAlignedProblem& problem,
                                 const Eigen::Matrix3d& Ry) {
  const Eigen::Vector3d w = Ry * problem.q1;
  Eigen::Matrix3d M;
  // q2^T [t']x w = (w x q2)^T t'
  M.row(0) = w.cross(problem.q2).transpose();
  // B Ry^T [t']x^T q2 + C [t']x w, both linear in t'.
  M.bottomRows<2>() = problem.B * Ry.transpose() * CrossMatrix(problem.q2) -
                      problem.C * CrossMatrix(w);
  return M;
}

// det M(x) vanishes for every x when the point lies in the plane of a
// planar motion. Every rotation about gravity then has a translation and a
// tangent plane reproducing the AC exactly, so one AC cannot fix the pose.
constexpr double kVanishingDetTol = 1e-12;

bool DeterminantVanishes(const GravityAlignedProblem& problem,
                         const Degree6Polynomial& poly) {
  double scale = 0.0;
  for (const double x : {-1.0, 0.0, 1.0}) {
    scale = std::max(scale, HiddenVariableMatrix(problem, x).norm());
  }
  return poly.MaxAbsCoefficient() <= kVanishingDetTol * scale * scale * scale;
}

// [coefficients of n' | rhs] for the three rows of p2 x (H p1) = 0 and the
// four affine rows, with H = R - t n'^T.
Eigen::Matrix<double, 7, 4> PlaneSystem(const AffineCorrespondence& ac,
                                        const RelativePose& pose) {
  const Eigen::Matrix3d& R = pose.R;
  const Eigen::Vector3d& t = pose.t;
  const Eigen::Vector3d x1 = Homogeneous(ac.p1);
  const Eigen::Vector3d x2 = Homogeneous(ac.p2);
  Eigen::Matrix<double, 7, 4> system;

  // H p1 = R p1 - t (n'^T p1).
  const Eigen::Vector3d x2_cross_t = x2.cross(t);
  const Eigen::Vector3d x2_cross_Rx1 = x2.cross(R * x1);
  for (int i = 0; i < 3; ++i) {
    system.row(i) << x2_cross_t(i) * x1.transpose(), x2_cross_Rx1(i);
  }

  // h_ij - w_i h_3j = a_ij (h_3 . p1) for i, j in {0, 1} with w = p2.
  const double s_const = R.row(2).dot(x1);
  int row = 3;
  for (int i = 0; i < 2; ++i) {
    const double w = x2(i);
    for (int j = 0; j < 2; ++j) {
      const double a = ac.A(i, j);
      Eigen::RowVector3d coeff = a * t.z() * x1.transpose();
      coeff(j) += -t(i) + w * t.z();
      system.row(row) << coeff, -(R(i, j) - w * R(2, j) - a * s_const);
      ++row;
    }
  }
  return system;
}

std::vector<RelativePose> PosesFromRoots(const GravityAlignedProblem& problem,
                                         const Degree6Polynomial& poly) {
  const std::vector<double> roots = RealRoots(poly);
  std::vector<RelativePose> poses;
  bool degenerate = false;
  for (const double x : roots) {
    const Eigen::Matrix3d M = HiddenVariableMatrix(problem, x);
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullV);
    const Eigen::Vector3d sigma = svd.singularValues();
    if (!(sigma(0) > 0.0)) continue;
    if (sigma(1) - sigma(2) <= kKernelGapTol * sigma(0)) {
      degenerate = true;
      continue;
    }
    const Eigen::Vector3d t_aligned = svd.matrixV().col(2).normalized();
    if ((M * t_aligned).norm() >= kKernelResidualTol * M.norm()) continue;

    const Eigen::Matrix3d R =
        problem.R2.transpose() * RotationAboutY(x) * problem.R1;
    const Eigen::Vector3d t = problem.R2.transpose() * t_aligned;
    poses.push_back(RelativePose{R, t});
    poses.push_back(RelativePose{R, -t});
  }
  if (poses.empty()) {
    if (degenerate) {
      throw Error(ErrorKind::kDegenerateKernel,
                  "no root with an isolated kernel");
    }
    throw Error(ErrorKind::kNoRealRoots, "no admissible root");
  }
  return poses;
}

}  // namespace

Eigen::Matrix3d AlignToGravity(const GravityDirection& gravity) {
  const Eigen::Vector3d& v = gravity.vector();
  const double d = std::hypot(v.x(), v.z());
  if (d < 1e-12) {
    if (v.y() > 0.0) return Eigen::Matrix3d::Identity();
    return Eigen::Vector3d(1.0, -1.0, -1.0).asDiagonal();
  }
  // Axis v x y, angle arccos(v_y).
  const Eigen::Vector3d axis(-v.z() / d, 0.0, v.x() / d);
  const Eigen::Matrix3d K = CrossMatrix(axis);
  const double s = d;
  const double c = v.y();
  return Eigen::Matrix3d::Identity() + s * K + (1.0 - c) * K * K;
}

Eigen::Matrix3d RotationAboutY(double x) {
  return ScaledRotationAboutY(x) / (1.0 + x * x);
}

GravityAlignedProblem BuildGravityProblem(const AffineCorrespondence& ac,
                                          const GravityDirection& v1,
                                          const GravityDirection& v2) {
  if (!ac.IsValid()) {
    throw Error(ErrorKind::kSingularAffine, "affine frame is not invertible");
  }
  GravityAlignedProblem problem;
  problem.R1 = AlignToGravity(v1);
  problem.R2 = AlignToGravity(v2);
  problem.q1 = problem.R1 * Homogeneous(ac.p1);
  problem.q2 = problem.R2 * Homogeneous(ac.p2);
  const Eigen::Matrix2d A_inv_t = ac.A.inverse().transpose();
  problem.B = A_inv_t * problem.R1.transpose().topRows<2>();
  problem.C = problem.R2.transpose().topRows<2>();
  return problem;
}

Eigen::Matrix3d HiddenVariableMatrix(const GravityAlignedProblem& problem,
                                     double x) {
  return ConstraintMatrix(problem, ScaledRotationAboutY(x));
}

Degree6Polynomial DeterminantPolynomial(const GravityAlignedProblem& problem) {
  constexpr int kSamples = 7;
  Eigen::Matrix<double, kSamples, kSamples> vandermonde;
  Eigen::Matrix<double, kSamples, 1> values;
  for (int k = 0; k < kSamples; ++k) {
    const double x = std::cos((2.0 * k + 1.0) * std::numbers::pi / (2.0 * kSamples));
    double power = 1.0;
    for (int j = 0; j < kSamples; ++j) {
      vandermonde(k, j) = power;
      power *= x;
    }
    values(k) = HiddenVariableMatrix(problem, x).determinant();
  }
  const Eigen::Matrix<double, kSamples, 1> c =
      vandermonde.partialPivLu().solve(values);
  Degree6Polynomial poly;
  for (int j = 0; j < kSamples; ++j) poly.coeffs[j] = c(j);
  return poly;
}

SolverOutput SolvePose1ACGravity(const AffineCorrespondence& ac,
                                 const GravityDirection& v1,
                                 const GravityDirection& v2) {
  const GravityAlignedProblem problem = BuildGravityProblem(ac, v1, v2);
  const Degree6Polynomial poly = DeterminantPolynomial(problem);
  if (DeterminantVanishes(problem, poly)) {
    throw Error(ErrorKind::kDegenerateConfiguration,
                "rotation about gravity is not determined by the constraints");
  }
  SolverOutput output;
  output.poses = PosesFromRoots(problem, poly);
  return output;
}

PlaneFromPose HomographyFromPose(const AffineCorrespondence& ac,
                                 const RelativePose& pose) {
  const Eigen::Matrix<double, 7, 4> system = PlaneSystem(ac, pose);
  // Two of the three point-transfer rows are independent; drop the one with
  // the weakest coefficients.
  const Eigen::Vector3d x2_cross_t = Homogeneous(ac.p2).cross(pose.t);
  Eigen::Index weakest = 0;
  x2_cross_t.cwiseAbs().minCoeff(&weakest);
  Eigen::Matrix<double, 6, 3> lhs;
  Eigen::Matrix<double, 6, 1> rhs;
  int row = 0;
  for (int i = 0; i < 7; ++i) {
    if (i == weakest) continue;
    lhs.row(row) = system.block<1, 3>(i, 0);
    rhs(row) = system(i, 3);
    ++row;
  }

  Eigen::JacobiSVD<Eigen::Matrix<double, 6, 3>> svd(
      lhs, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sigma = svd.singularValues();
  if (!(sigma(0) > 0.0) || sigma(2) <= 1e-10 * sigma(0)) {
    throw Error(ErrorKind::kRankDeficientSystem,
                "plane system has rank below 3");
  }
  PlaneFromPose result;
  result.plane_normal = svd.solve(rhs);
  result.H = pose.R - pose.t * result.plane_normal.transpose();
  return result;
}

SolverOutput SolveHomography1ACGravity(const AffineCorrespondence& ac,
                                       const GravityDirection& v1,
                                       const GravityDirection& v2) {
  // Poses come in (+t, -t) pairs sharing one homography.
  const std::vector<RelativePose> pairs = SolvePose1ACGravity(ac, v1, v2).poses;
  std::vector<RelativePose> poses;
  for (size_t i = 0; i < pairs.size(); i += 2) poses.push_back(pairs[i]);
  SolverOutput output;
  const Eigen::Vector3d x1 = Homogeneous(ac.p1);
  for (RelativePose pose : poses) {
    PlaneFromPose plane;
    try {
      plane = HomographyFromPose(ac, pose);
    } catch (const Error&) {
      continue;
    }
    if (plane.plane_normal.dot(x1) < 0.0) {
      pose.t = -pose.t;
      plane.plane_normal = -plane.plane_normal;
    }
    if (!plane.H.allFinite()) continue;
    output.poses.push_back(pose);
    output.homographies.push_back(
        ModelHypothesis::Homography(plane.H, pose, plane.plane_normal));
  }
  if (output.homographies.empty()) {
    throw Error(ErrorKind::kRankDeficientSystem,
                "no pose candidate yields a homography");
  }
  return output;
}

}  // namespace affineglue
