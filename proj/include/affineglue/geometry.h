#pragma once

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace affineglue {

// Pixel or calibrated image coordinates; the homogeneous coordinate is 1.
using ImagePoint = Eigen::Vector2d;

inline Eigen::Vector3d Homogeneous(const ImagePoint& p) {
  return Eigen::Vector3d(p.x(), p.y(), 1.0);
}

struct PointPair {
  ImagePoint p1;
  ImagePoint p2;
};

// A point match together with the 2x2 local affine frame mapping the
// neighborhood of p1 onto the neighborhood of p2.
struct AffineCorrespondence {
  ImagePoint p1;
  ImagePoint p2;
  Eigen::Matrix2d A;

  // Finite entries and invertible A.
  bool IsValid() const;
};

class CameraIntrinsics {
 public:
  // Throws kInvalidArgument unless K is upper triangular with K(2,2) = 1 and
  // positive focal lengths.
  explicit CameraIntrinsics(const Eigen::Matrix3d& K);

  static CameraIntrinsics FromFocal(double focal, double cx = 0.0,
                                    double cy = 0.0);

  const Eigen::Matrix3d& K() const { return K_; }
  const Eigen::Matrix3d& KInverse() const { return K_inv_; }
  double MeanFocal() const { return 0.5 * (K_(0, 0) + K_(1, 1)); }

 private:
  Eigen::Matrix3d K_;
  Eigen::Matrix3d K_inv_;
};

// Direction of gravity in a camera frame, stored with unit norm.
class GravityDirection {
 public:
  // Normalizes v; throws kInvalidArgument for zero or non-finite input.
  explicit GravityDirection(const Eigen::Vector3d& v);

  static GravityDirection Down() { return GravityDirection({0.0, -1.0, 0.0}); }

  const Eigen::Vector3d& vector() const { return v_; }

 private:
  Eigen::Vector3d v_;
};

// Relative pose with the convention X2 = R * X1 - t. Under it E = [t]x R and a
// plane n^T X1 = d induces H = R - t n^T / d.
struct RelativePose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::UnitX();

  // Normalizes t and validates R (orthonormal, det +1 within 1e-9).
  static RelativePose Make(const Eigen::Matrix3d& R, const Eigen::Vector3d& t);

  // Camera-2 coordinates of a camera-1 point.
  Eigen::Vector3d Transform(const Eigen::Vector3d& X1) const {
    return R * X1 - t;
  }
};

enum class ModelKind { kEssential, kHomography };

struct ModelHypothesis {
  ModelKind kind = ModelKind::kEssential;
  Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
  std::optional<RelativePose> pose;
  // n' = n / d, homographies only.
  std::optional<Eigen::Vector3d> plane_normal;

  // Normalizes E to Frobenius norm sqrt(2).
  static ModelHypothesis Essential(const Eigen::Matrix3d& E,
                                   std::optional<RelativePose> pose = {});
  // Normalizes H to unit Frobenius norm with its largest-magnitude entry
  // positive.
  static ModelHypothesis Homography(
      const Eigen::Matrix3d& H, std::optional<RelativePose> pose = {},
      std::optional<Eigen::Vector3d> plane_normal = {});
};

Eigen::Matrix3d CrossMatrix(const Eigen::Vector3d& v);

Eigen::Matrix3d NormalizeEssentialScale(const Eigen::Matrix3d& E);
Eigen::Matrix3d NormalizeHomographyScale(const Eigen::Matrix3d& H);

// Projects onto the essential manifold: singular values (1, 1, 0), scaled to
// Frobenius norm sqrt(2).
Eigen::Matrix3d ProjectToEssential(const Eigen::Matrix3d& E);

ImagePoint NormalizePoint(const ImagePoint& p, const CameraIntrinsics& K);
ImagePoint DenormalizePoint(const ImagePoint& p, const CameraIntrinsics& K);

// Maps a pixel-space affine frame into calibrated coordinates via the chain
// rule of the two normalization maps. Throws kSingularAffine.
Eigen::Matrix2d NormalizeAffine(const Eigen::Matrix2d& A,
                                const CameraIntrinsics& K1,
                                const CameraIntrinsics& K2);
Eigen::Matrix2d DenormalizeAffine(const Eigen::Matrix2d& A,
                                  const CameraIntrinsics& K1,
                                  const CameraIntrinsics& K2);

AffineCorrespondence NormalizeCorrespondence(const AffineCorrespondence& ac,
                                             const CameraIntrinsics& K1,
                                             const CameraIntrinsics& K2);

// n1 = (E^T p2)[0:2], n2 = (E p1)[0:2].
std::pair<Eigen::Vector2d, Eigen::Vector2d> EpipolarNormals(
    const Eigen::Matrix3d& E, const ImagePoint& p1, const ImagePoint& p2);

// A^-T n1 + n2. Throws kSingularAffine.
Eigen::Vector2d AffineEpipolarResidual(const AffineCorrespondence& ac,
                                       const Eigen::Matrix3d& E);

// First-order geometric error in point units. Throws kDegenerateResidual.
double SampsonDistance(const ImagePoint& p1, const ImagePoint& p2,
                       const Eigen::Matrix3d& E);

// RMS of the point-to-epipolar-line distances in the two images.
double SymmetricEpipolarError(const ImagePoint& p1, const ImagePoint& p2,
                              const Eigen::Matrix3d& E);

// RMS of the forward and backward transfer distances.
// Throws kPointAtInfinity.
double HomographyTransferError(const ImagePoint& p1, const ImagePoint& p2,
                               const Eigen::Matrix3d& H);

// Same as above with a precomputed inverse.
double HomographyTransferError(const ImagePoint& p1, const ImagePoint& p2,
                               const Eigen::Matrix3d& H,
                               const Eigen::Matrix3d& H_inv);

// Maps p through H and dehomogenizes. Throws kPointAtInfinity.
ImagePoint TransferPoint(const Eigen::Matrix3d& H, const ImagePoint& p);

// 2x2 Jacobian of the point map p -> TransferPoint(H, p) at p.
Eigen::Matrix2d HomographyJacobian(const Eigen::Matrix3d& H,
                                   const ImagePoint& p);

Eigen::Matrix3d ComposeEssential(const RelativePose& pose);

// Depths of the midpoint triangulation in camera 1 and camera 2. Returns
// nullopt for (near-)parallel rays.
std::optional<std::pair<double, double>> TriangulateDepths(
    const RelativePose& pose, const ImagePoint& p1, const ImagePoint& p2);

bool PassesCheirality(const RelativePose& pose, const ImagePoint& p1,
                      const ImagePoint& p2);

// The four (R, t) factorizations of E in a fixed order.
std::array<RelativePose, 4> EssentialPoseCandidates(const Eigen::Matrix3d& E);

// Picks the factorization that places the sample in front of both cameras.
// Throws kCheiralityFailure.
RelativePose DecomposeEssential(const Eigen::Matrix3d& E, const PointPair& sample);

// Picks the factorization with the most points in front of both cameras
// (earliest candidate on ties). Throws kCheiralityFailure if none passes.
RelativePose DecomposeEssentialByVote(const Eigen::Matrix3d& E,
                                      const std::vector<PointPair>& matches);

struct HomographyDecomposition {
  RelativePose pose;
  Eigen::Vector3d plane_normal;  // n' = n / d
};

// Up to eight (R, t, n') triplets with H ~ R - t n'^T, covering both signs of
// the scale. Returns an empty list for a rotation-only homography.
std::vector<HomographyDecomposition> DecomposeHomography(
    const Eigen::Matrix3d& H);

}  // namespace affineglue
