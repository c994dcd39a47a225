#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "affineglue/geometry.h"
#include "affineglue/polynomial.h"

namespace affineglue {

// Rotation taking the gravity direction onto +y (Rodrigues about v x y).
// v = -y maps to a half turn about x; v = +y maps to the identity.
Eigen::Matrix3d AlignToGravity(const GravityDirection& v);

// Rotation about the y axis parametrized by x = tan(phi / 2).
Eigen::Matrix3d RotationAboutY(double x);

// Single-AC problem expressed in gravity-aligned frames.
struct GravityAlignedProblem {
  Eigen::Matrix3d R1;
  Eigen::Matrix3d R2;
  Eigen::Vector3d q1;
  Eigen::Vector3d q2;
  Eigen::Matrix<double, 2, 3> B;  // A^-T times the first two rows of R1^T
  Eigen::Matrix<double, 2, 3> C;  // first two rows of R2^T
};

// Throws kSingularAffine.
GravityAlignedProblem BuildGravityProblem(const AffineCorrespondence& ac,
                                          const GravityDirection& v1,
                                          const GravityDirection& v2);

// M(x) with M(x) t' = 0 on a solution. Row 0 is the epipolar constraint,
// rows 1-2 the affine constraints, all multiplied by (1 + x^2) so every entry
// is quadratic in x.
Eigen::Matrix3d HiddenVariableMatrix(const GravityAlignedProblem& problem,
                                     double x);

// det M(x), interpolated from seven Chebyshev samples.
Degree6Polynomial DeterminantPolynomial(const GravityAlignedProblem& problem);

struct SolverOutput {
  std::vector<RelativePose> poses;
  // Filled by the homography solver, one per distinct H.
  std::vector<ModelHypothesis> homographies;
};

// Relative pose from one AC and the gravity directions of both cameras.
// Candidates are ordered by root ascending, then +t' before -t'.
// Throws kSingularAffine or kNoRealRoots; roots whose M(x) has no isolated
// kernel are skipped (kDegenerateKernel if that leaves nothing).
SolverOutput SolvePose1ACGravity(const AffineCorrespondence& ac,
                                 const GravityDirection& v1,
                                 const GravityDirection& v2);

struct PlaneFromPose {
  Eigen::Matrix3d H;  // R - t n'^T, unnormalized
  Eigen::Vector3d plane_normal;
};

// Least-squares n' from the two point-transfer rows and the four
// affine-homography rows. Throws kRankDeficientSystem.
PlaneFromPose HomographyFromPose(const AffineCorrespondence& ac,
                                 const RelativePose& pose);

// Runs the pose solver, then recovers one homography per root. The stored
// pose sign is the one that puts p1 in front of the plane.
SolverOutput SolveHomography1ACGravity(const AffineCorrespondence& ac,
                                       const GravityDirection& v1,
                                       const GravityDirection& v2);

// Normalized DLT on four point pairs. Throws kDegenerateConfiguration.
ModelHypothesis SolveHomography4PC(const std::array<PointPair, 4>& matches);

// Normalized DLT on any number (>= 4) of point pairs.
ModelHypothesis FitHomographyDLT(const std::vector<PointPair>& matches);

// Normalized eight-point fit projected onto the essential manifold; the pose
// is chosen by a cheirality vote over the input. Throws
// kDegenerateConfiguration or kCheiralityFailure.
ModelHypothesis RefitEssential8pt(const std::vector<PointPair>& matches);

struct RefinementOptions {
  int max_iterations = 50;
  double gradient_tolerance = 1e-10;
};

// Levenberg-Marquardt on the summed squared Sampson distances (essential,
// rotation as a left-multiplied axis-angle increment and t on a local
// azimuth/elevation chart) or summed squared forward and backward transfer
// errors (homography, eight entries with h33 held at +-1). Never increases the
// objective; returns the input when no step helps.
ModelHypothesis RefinePoseNonlinear(const ModelHypothesis& model,
                                    const std::vector<PointPair>& inliers,
                                    const RefinementOptions& options = {});

// Objective minimized by RefinePoseNonlinear.
double RefinementObjective(const ModelHypothesis& model,
                           const std::vector<PointPair>& inliers);

namespace internal {

// Residuals and analytic Jacobian at the refinement chart origin, exposed for
// finite-difference checks. For essential models the parameter vector is
// (w_x, w_y, w_z, azimuth, elevation); for homographies it is the eight free
// entries of H scaled so that |h33| = 1.
struct ResidualJacobian {
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;
};
ResidualJacobian EssentialResiduals(const RelativePose& pose,
                                    const std::vector<PointPair>& inliers);
RelativePose EssentialChartPoint(const RelativePose& pose,
                                 const Eigen::Matrix<double, 5, 1>& delta);
ResidualJacobian HomographyResiduals(const Eigen::Matrix3d& H,
                                     const std::vector<PointPair>& inliers);
Eigen::Matrix3d HomographyChartPoint(const Eigen::Matrix3d& H,
                                     const Eigen::Matrix<double, 8, 1>& delta);

}  // namespace internal

}  // namespace affineglue
