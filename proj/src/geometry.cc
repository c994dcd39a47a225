#include "affineglue/geometry.h"

#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "affineglue/errors.h"

namespace affineglue {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
      return "InvalidArgument";
    case ErrorKind::kSingularAffine:
      return "SingularAffine";
    case ErrorKind::kDegenerateResidual:
      return "DegenerateResidual";
    case ErrorKind::kPointAtInfinity:
      return "PointAtInfinity";
    case ErrorKind::kCheiralityFailure:
      return "CheiralityFailure";
    case ErrorKind::kNoRealRoots:
      return "NoRealRoots";
    case ErrorKind::kDegenerateKernel:
      return "DegenerateKernel";
    case ErrorKind::kRankDeficientSystem:
      return "RankDeficientSystem";
    case ErrorKind::kDegenerateConfiguration:
      return "DegenerateConfiguration";
    case ErrorKind::kPoolExhausted:
      return "PoolExhausted";
    case ErrorKind::kNoModelFound:
      return "NoModelFound";
    case ErrorKind::kGenerationFailure:
      return "GenerationFailure";
    case ErrorKind::kGrazingPlane:
      return "GrazingPlane";
    case ErrorKind::kEmptyInput:
      return "EmptyInput";
    case ErrorKind::kParseError:
      return "ParseError";
  }
  return "Unknown";
}

namespace {

constexpr double kSingularAffineTol = 1e-12;
constexpr double kDegenerateResidualTol = 1e-15;
constexpr double kAtInfinityTol = 1e-12;

bool IsInvertibleAffine(const Eigen::Matrix2d& A) {
  const double scale = A.squaredNorm();
  return A.allFinite() && scale > 0.0 &&
         std::abs(A.determinant()) > kSingularAffineTol * scale;
}

}  // namespace

bool AffineCorrespondence::IsValid() const {
  return p1.allFinite() && p2.allFinite() && IsInvertibleAffine(A);
}

CameraIntrinsics::CameraIntrinsics(const Eigen::Matrix3d& K) : K_(K) {
  if (!K.allFinite() || K(2, 2) != 1.0 || K(0, 0) <= 0.0 || K(1, 1) <= 0.0 ||
      K(1, 0) != 0.0 || K(2, 0) != 0.0 || K(2, 1) != 0.0) {
    throw Error(ErrorKind::kInvalidArgument,
                "intrinsics must be upper triangular with K(2,2)=1 and "
                "positive focal lengths");
  }
  K_inv_ = K_.inverse();
}

CameraIntrinsics CameraIntrinsics::FromFocal(double focal, double cx,
                                             double cy) {
  Eigen::Matrix3d K;
  K << focal, 0.0, cx, 0.0, focal, cy, 0.0, 0.0, 1.0;
  return CameraIntrinsics(K);
}

GravityDirection::GravityDirection(const Eigen::Vector3d& v) {
  const double norm = v.norm();
  if (!v.allFinite() || norm <= 0.0) {
    throw Error(ErrorKind::kInvalidArgument,
                "gravity direction must be finite and nonzero");
  }
  v_ = v / norm;
}

RelativePose RelativePose::Make(const Eigen::Matrix3d& R,
                                const Eigen::Vector3d& t) {
  if (!R.allFinite() || !t.allFinite()) {
    throw Error(ErrorKind::kInvalidArgument, "pose must be finite");
  }
  if ((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() >
          1e-9 ||
      std::abs(R.determinant() - 1.0) > 1e-9) {
    throw Error(ErrorKind::kInvalidArgument, "R is not a proper rotation");
  }
  const double norm = t.norm();
  if (norm <= 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "translation must be nonzero");
  }
  RelativePose pose;
  pose.R = R;
  pose.t = t / norm;
  return pose;
}

ModelHypothesis ModelHypothesis::Essential(const Eigen::Matrix3d& E,
                                           std::optional<RelativePose> pose) {
  ModelHypothesis model;
  model.kind = ModelKind::kEssential;
  model.M = NormalizeEssentialScale(E);
  model.pose = std::move(pose);
  return model;
}

ModelHypothesis ModelHypothesis::Homography(
    const Eigen::Matrix3d& H, std::optional<RelativePose> pose,
    std::optional<Eigen::Vector3d> plane_normal) {
  ModelHypothesis model;
  model.kind = ModelKind::kHomography;
  model.M = NormalizeHomographyScale(H);
  model.pose = std::move(pose);
  model.plane_normal = std::move(plane_normal);
  return model;
}

Eigen::Matrix3d CrossMatrix(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

Eigen::Matrix3d NormalizeEssentialScale(const Eigen::Matrix3d& E) {
  const double norm = E.norm();
  if (norm <= 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "zero essential matrix");
  }
  return E * (std::sqrt(2.0) / norm);
}

Eigen::Matrix3d NormalizeHomographyScale(const Eigen::Matrix3d& H) {
  const double norm = H.norm();
  if (norm <= 0.0 || !H.allFinite()) {
    throw Error(ErrorKind::kInvalidArgument, "invalid homography");
  }
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  H.cwiseAbs().maxCoeff(&row, &col);
  const double sign = H(row, col) < 0.0 ? -1.0 : 1.0;
  return H * (sign / norm);
}

Eigen::Matrix3d ProjectToEssential(const Eigen::Matrix3d& E) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(E, Eigen::ComputeFullU |
                                               Eigen::ComputeFullV);
  const Eigen::Vector3d sigma(1.0, 1.0, 0.0);
  return svd.matrixU() * sigma.asDiagonal() * svd.matrixV().transpose();
}

ImagePoint NormalizePoint(const ImagePoint& p, const CameraIntrinsics& K) {
  const Eigen::Vector3d x = K.KInverse() * Homogeneous(p);
  return x.hnormalized();
}

ImagePoint DenormalizePoint(const ImagePoint& p, const CameraIntrinsics& K) {
  const Eigen::Vector3d x = K.K() * Homogeneous(p);
  return x.hnormalized();
}

Eigen::Matrix2d NormalizeAffine(const Eigen::Matrix2d& A,
                                const CameraIntrinsics& K1,
                                const CameraIntrinsics& K2) {
  // The normalization maps are affine, so their Jacobians are the upper-left
  // blocks of K^-1 everywhere.
  const Eigen::Matrix2d result =
      K2.KInverse().topLeftCorner<2, 2>() * A * K1.K().topLeftCorner<2, 2>();
  if (!IsInvertibleAffine(result)) {
    throw Error(ErrorKind::kSingularAffine, "normalized affine is singular");
  }
  return result;
}

Eigen::Matrix2d DenormalizeAffine(const Eigen::Matrix2d& A,
                                  const CameraIntrinsics& K1,
                                  const CameraIntrinsics& K2) {
  const Eigen::Matrix2d result =
      K2.K().topLeftCorner<2, 2>() * A * K1.KInverse().topLeftCorner<2, 2>();
  if (!IsInvertibleAffine(result)) {
    throw Error(ErrorKind::kSingularAffine, "denormalized affine is singular");
  }
  return result;
}

AffineCorrespondence NormalizeCorrespondence(const AffineCorrespondence& ac,
                                             const CameraIntrinsics& K1,
                                             const CameraIntrinsics& K2) {
  return {NormalizePoint(ac.p1, K1), NormalizePoint(ac.p2, K2),
          NormalizeAffine(ac.A, K1, K2)};
}

std::pair<Eigen::Vector2d, Eigen::Vector2d> EpipolarNormals(
    const Eigen::Matrix3d& E, const ImagePoint& p1, const ImagePoint& p2) {
  const Eigen::Vector3d l1 = E.transpose() * Homogeneous(p2);
  const Eigen::Vector3d l2 = E * Homogeneous(p1);
  return {l1.head<2>(), l2.head<2>()};
}

Eigen::Vector2d AffineEpipolarResidual(const AffineCorrespondence& ac,
                                       const Eigen::Matrix3d& E) {
  if (!IsInvertibleAffine(ac.A)) {
    throw Error(ErrorKind::kSingularAffine, "affine frame is not invertible");
  }
  const auto [n1, n2] = EpipolarNormals(E, ac.p1, ac.p2);
  return ac.A.transpose().lu().solve(n1) + n2;
}

double SampsonDistance(const ImagePoint& p1, const ImagePoint& p2,
                       const Eigen::Matrix3d& E) {
  const Eigen::Vector3d x1 = Homogeneous(p1);
  const Eigen::Vector3d x2 = Homogeneous(p2);
  const Eigen::Vector3d Ex1 = E * x1;
  const Eigen::Vector3d Etx2 = E.transpose() * x2;
  const double algebraic = x2.dot(Ex1);
  const double denom = Ex1.head<2>().squaredNorm() + Etx2.head<2>().squaredNorm();
  if (denom < kDegenerateResidualTol) {
    throw Error(ErrorKind::kDegenerateResidual, "both points at epipoles");
  }
  return std::abs(algebraic) / std::sqrt(denom);
}

double SymmetricEpipolarError(const ImagePoint& p1, const ImagePoint& p2,
                              const Eigen::Matrix3d& E) {
  const Eigen::Vector3d x1 = Homogeneous(p1);
  const Eigen::Vector3d x2 = Homogeneous(p2);
  const Eigen::Vector3d Ex1 = E * x1;
  const Eigen::Vector3d Etx2 = E.transpose() * x2;
  const double algebraic = x2.dot(Ex1);
  const double n2 = Ex1.head<2>().squaredNorm();
  const double n1 = Etx2.head<2>().squaredNorm();
  if (n1 < kDegenerateResidualTol || n2 < kDegenerateResidualTol) {
    throw Error(ErrorKind::kDegenerateResidual, "point at an epipole");
  }
  const double a2 = algebraic * algebraic;
  return std::sqrt(0.5 * (a2 / n1 + a2 / n2));
}

ImagePoint TransferPoint(const Eigen::Matrix3d& H, const ImagePoint& p) {
  const Eigen::Vector3d x = H * Homogeneous(p);
  if (std::abs(x.z()) < kAtInfinityTol) {
    throw Error(ErrorKind::kPointAtInfinity, "point maps to infinity");
  }
  return x.hnormalized();
}

double HomographyTransferError(const ImagePoint& p1, const ImagePoint& p2,
                               const Eigen::Matrix3d& H,
                               const Eigen::Matrix3d& H_inv) {
  const double forward = (TransferPoint(H, p1) - p2).squaredNorm();
  const double backward = (TransferPoint(H_inv, p2) - p1).squaredNorm();
  return std::sqrt(0.5 * (forward + backward));
}

double HomographyTransferError(const ImagePoint& p1, const ImagePoint& p2,
                               const Eigen::Matrix3d& H) {
  return HomographyTransferError(p1, p2, H, H.inverse());
}

Eigen::Matrix2d HomographyJacobian(const Eigen::Matrix3d& H,
                                   const ImagePoint& p) {
  const Eigen::Vector3d x = H * Homogeneous(p);
  if (std::abs(x.z()) < kAtInfinityTol) {
    throw Error(ErrorKind::kPointAtInfinity, "point maps to infinity");
  }
  const double s = x.z();
  const double u = x.x() / s;
  const double v = x.y() / s;
  Eigen::Matrix2d J;
  J << H(0, 0) - u * H(2, 0), H(0, 1) - u * H(2, 1),  //
      H(1, 0) - v * H(2, 0), H(1, 1) - v * H(2, 1);
  return J / s;
}

Eigen::Matrix3d ComposeEssential(const RelativePose& pose) {
  return NormalizeEssentialScale(CrossMatrix(pose.t) * pose.R);
}

std::optional<std::pair<double, double>> TriangulateDepths(
    const RelativePose& pose, const ImagePoint& p1, const ImagePoint& p2) {
  // Camera 2 sits at R^T t in the frame of camera 1.
  const Eigen::Vector3d center2 = pose.R.transpose() * pose.t;
  const Eigen::Vector3d ray1 = Homogeneous(p1);
  const Eigen::Vector3d ray2 = pose.R.transpose() * Homogeneous(p2);
  // Least squares for lambda1 * ray1 - lambda2 * ray2 = center2.
  const double a = ray1.dot(ray1);
  const double b = ray1.dot(ray2);
  const double c = ray2.dot(ray2);
  const double det = a * c - b * b;
  if (det <= 1e-12 * a * c) {
    return std::nullopt;
  }
  const double r1 = ray1.dot(center2);
  const double r2 = ray2.dot(center2);
  const double lambda1 = (c * r1 - b * r2) / det;
  const double lambda2 = (b * r1 - a * r2) / det;
  const Eigen::Vector3d X =
      0.5 * (lambda1 * ray1 + center2 + lambda2 * ray2);
  return std::make_pair(X.z(), pose.Transform(X).z());
}

bool PassesCheirality(const RelativePose& pose, const ImagePoint& p1,
                      const ImagePoint& p2) {
  const auto depths = TriangulateDepths(pose, p1, p2);
  return depths && depths->first > 0.0 && depths->second > 0.0;
}

std::array<RelativePose, 4> EssentialPoseCandidates(const Eigen::Matrix3d& E) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(E, Eigen::ComputeFullU |
                                               Eigen::ComputeFullV);
  Eigen::Matrix3d U = svd.matrixU();
  Eigen::Matrix3d V = svd.matrixV();
  if (U.determinant() < 0.0) U = -U;
  if (V.determinant() < 0.0) V = -V;
  Eigen::Matrix3d W;
  W << 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0;
  const Eigen::Matrix3d Ra = U * W * V.transpose();
  const Eigen::Matrix3d Rb = U * W.transpose() * V.transpose();
  const Eigen::Vector3d t = U.col(2);
  std::array<RelativePose, 4> candidates;
  candidates[0] = RelativePose{Ra, t};
  candidates[1] = RelativePose{Ra, -t};
  candidates[2] = RelativePose{Rb, t};
  candidates[3] = RelativePose{Rb, -t};
  return candidates;
}

RelativePose DecomposeEssential(const Eigen::Matrix3d& E,
                                const PointPair& sample) {
  for (const RelativePose& pose : EssentialPoseCandidates(E)) {
    if (PassesCheirality(pose, sample.p1, sample.p2)) {
      return pose;
    }
  }
  throw Error(ErrorKind::kCheiralityFailure,
              "no factorization places the sample in front of both cameras");
}

RelativePose DecomposeEssentialByVote(const Eigen::Matrix3d& E,
                                      const std::vector<PointPair>& matches) {
  const auto candidates = EssentialPoseCandidates(E);
  int best = -1;
  int best_count = 0;
  for (int i = 0; i < 4; ++i) {
    int count = 0;
    for (const PointPair& m : matches) {
      count += PassesCheirality(candidates[i], m.p1, m.p2) ? 1 : 0;
    }
    if (count > best_count) {
      best_count = count;
      best = i;
    }
  }
  if (best < 0) {
    throw Error(ErrorKind::kCheiralityFailure,
                "no factorization places any point in front of both cameras");
  }
  return candidates[best];
}

std::vector<HomographyDecomposition> DecomposeHomography(
    const Eigen::Matrix3d& H) {
  std::vector<HomographyDecomposition> out;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd_h(H);
  const double sigma2 = svd_h.singularValues()(1);
  if (sigma2 <= 0.0) return out;

  for (const double sign : {1.0, -1.0}) {
    // Write the scaled H as R + T N^T with unit N.
    const Eigen::Matrix3d Hn = sign * H / sigma2;
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(Hn.transpose() * Hn,
                                          Eigen::ComputeFullV);
    Eigen::Matrix3d V = svd.matrixV();
    if (V.determinant() < 0.0) V = -V;
    const Eigen::Vector3d s2 = svd.singularValues();
    const double s1 = s2(0);
    const double s3 = s2(2);
    if (s1 - s3 < 1e-12) return out;  // pure rotation

    const Eigen::Vector3d v1 = V.col(0);
    const Eigen::Vector3d v2 = V.col(1);
    const Eigen::Vector3d v3 = V.col(2);
    const double a = std::sqrt(std::max(0.0, 1.0 - s3));
    const double b = std::sqrt(std::max(0.0, s1 - 1.0));
    const double denom = std::sqrt(s1 - s3);
    const Eigen::Vector3d u1 = (a * v1 + b * v3) / denom;
    const Eigen::Vector3d u2 = (a * v1 - b * v3) / denom;

    for (const Eigen::Vector3d& u : {u1, u2}) {
      Eigen::Matrix3d U;
      U << v2, u, v2.cross(u);
      Eigen::Matrix3d W;
      const Eigen::Vector3d hv2 = Hn * v2;
      const Eigen::Vector3d hu = Hn * u;
      W << hv2, hu, hv2.cross(hu);
      const Eigen::Matrix3d R = W * U.transpose();
      const Eigen::Vector3d N = v2.cross(u);
      const Eigen::Vector3d T = (Hn - R) * N;
      if ((R + T * N.transpose() - Hn).norm() > 1e-6 * Hn.norm()) continue;
      if (std::abs(R.determinant() - 1.0) > 1e-6) continue;
      const double tn = T.norm();
      if (tn < 1e-12) continue;
      for (const double flip : {1.0, -1.0}) {
        HomographyDecomposition d;
        d.pose.R = R;
        d.pose.t = -flip * T / tn;
        d.plane_normal = flip * N * tn;
        out.push_back(d);
      }
    }
  }
  return out;
}

}  // namespace affineglue
