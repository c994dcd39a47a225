#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "affineglue/errors.h"
#include "affineglue/solvers.h"

namespace affineglue {
namespace internal {
namespace {

// Orthonormal pair completing t to a right-handed basis.
std::pair<Eigen::Vector3d, Eigen::Vector3d> TangentBasis(
    const Eigen::Vector3d& t) {
  const Eigen::Vector3d helper = std::abs(t.x()) < 0.9 ? Eigen::Vector3d::UnitX()
                                                       : Eigen::Vector3d::UnitY();
  const Eigen::Vector3d b1 = t.cross(helper).normalized();
  const Eigen::Vector3d b2 = t.cross(b1);
  return {b1, b2};
}

Eigen::Matrix3d AxisAngle(const Eigen::Vector3d& w) {
  const double angle = w.norm();
  if (angle < 1e-300) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

}  // namespace

RelativePose EssentialChartPoint(const RelativePose& pose,
                                 const Eigen::Matrix<double, 5, 1>& delta) {
  const auto [b1, b2] = TangentBasis(pose.t);
  const double az = delta(3);
  const double el = delta(4);
  RelativePose out;
  out.R = AxisAngle(delta.head<3>()) * pose.R;
  out.t = (std::cos(el) * (std::cos(az) * pose.t + std::sin(az) * b1) +
           std::sin(el) * b2)
              .normalized();
  return out;
}

ResidualJacobian EssentialResiduals(const RelativePose& pose,
                                    const std::vector<PointPair>& inliers) {
  const auto [b1, b2] = TangentBasis(pose.t);
  const Eigen::Matrix3d tx = CrossMatrix(pose.t);
  const Eigen::Matrix3d E = tx * pose.R;
  std::array<Eigen::Matrix3d, 5> dE;
  for (int k = 0; k < 3; ++k) {
    dE[k] = tx * CrossMatrix(Eigen::Vector3d::Unit(k)) * pose.R;
  }
  dE[3] = CrossMatrix(b1) * pose.R;
  dE[4] = CrossMatrix(b2) * pose.R;

  ResidualJacobian out;
  out.residuals.resize(inliers.size());
  out.jacobian.resize(inliers.size(), 5);
  for (size_t i = 0; i < inliers.size(); ++i) {
    const Eigen::Vector3d x1 = Homogeneous(inliers[i].p1);
    const Eigen::Vector3d x2 = Homogeneous(inliers[i].p2);
    const Eigen::Vector3d l2 = E * x1;
    const Eigen::Vector3d l1 = E.transpose() * x2;
    const double a = x2.dot(l2);
    const double D = l2.head<2>().squaredNorm() + l1.head<2>().squaredNorm();
    if (D <= 0.0) {
      out.residuals(i) = 0.0;
      out.jacobian.row(i).setZero();
      continue;
    }
    const double sqrt_d = std::sqrt(D);
    out.residuals(i) = a / sqrt_d;
    for (int k = 0; k < 5; ++k) {
      const Eigen::Vector3d dl2 = dE[k] * x1;
      const Eigen::Vector3d dl1 = dE[k].transpose() * x2;
      const double da = x2.dot(dl2);
      const double dD = 2.0 * (l2.head<2>().dot(dl2.head<2>()) +
                               l1.head<2>().dot(dl1.head<2>()));
      out.jacobian(i, k) = da / sqrt_d - 0.5 * a * dD / (D * sqrt_d);
    }
  }
  return out;
}

Eigen::Matrix3d HomographyChartPoint(const Eigen::Matrix3d& H,
                                     const Eigen::Matrix<double, 8, 1>& delta) {
  Eigen::Matrix3d out = H;
  for (int k = 0; k < 8; ++k) out(k / 3, k % 3) += delta(k);
  return out;
}

ResidualJacobian HomographyResiduals(const Eigen::Matrix3d& H,
                                     const std::vector<PointPair>& inliers) {
  const Eigen::Matrix3d G = H.inverse();
  ResidualJacobian out;
  out.residuals.resize(4 * inliers.size());
  out.jacobian.resize(4 * inliers.size(), 8);
  for (size_t i = 0; i < inliers.size(); ++i) {
    const Eigen::Vector3d x1 = Homogeneous(inliers[i].p1);
    const Eigen::Vector3d x2 = Homogeneous(inliers[i].p2);
    const Eigen::Vector3d y = H * x1;
    const Eigen::Vector3d z = G * x2;
    if (std::abs(y.z()) < 1e-12 || std::abs(z.z()) < 1e-12) {
      throw Error(ErrorKind::kPointAtInfinity, "point maps to infinity");
    }
    out.residuals.segment<2>(4 * i) = y.hnormalized() - inliers[i].p2;
    out.residuals.segment<2>(4 * i + 2) = z.hnormalized() - inliers[i].p1;

    Eigen::Matrix<double, 2, 3> dpi_y;
    dpi_y << 1.0 / y.z(), 0.0, -y.x() / (y.z() * y.z()), 0.0, 1.0 / y.z(),
        -y.y() / (y.z() * y.z());
    Eigen::Matrix<double, 2, 3> dpi_z;
    dpi_z << 1.0 / z.z(), 0.0, -z.x() / (z.z() * z.z()), 0.0, 1.0 / z.z(),
        -z.y() / (z.z() * z.z());
    for (int k = 0; k < 8; ++k) {
      const int a = k / 3;
      const int b = k % 3;
      // dH = e_a e_b^T; d(H^-1) = -G dH G.
      const Eigen::Vector3d dy = Eigen::Vector3d::Unit(a) * x1(b);
      const Eigen::Vector3d dz = -G.col(a) * z(b);
      out.jacobian.block<2, 1>(4 * i, k) = dpi_y * dy;
      out.jacobian.block<2, 1>(4 * i + 2, k) = dpi_z * dz;
    }
  }
  return out;
}

}  // namespace internal

namespace {

double SumSquares(const Eigen::VectorXd& r) { return r.squaredNorm(); }

template <int kParams, typename ResidualFn, typename StepFn>
void LevenbergMarquardt(ResidualFn residual_fn, StepFn step_fn,
                        const RefinementOptions& options) {
  using Vec = Eigen::Matrix<double, kParams, 1>;
  using Mat = Eigen::Matrix<double, kParams, kParams>;
  double lambda = 1e-3;
  auto current = residual_fn();
  if (!current) return;
  double cost = SumSquares(current->residuals);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const Mat JtJ = current->jacobian.transpose() * current->jacobian;
    const Vec g = current->jacobian.transpose() * current->residuals;
    if (g.norm() < options.gradient_tolerance) break;
    Mat damped = JtJ;
    for (int k = 0; k < kParams; ++k) {
      damped(k, k) += lambda * std::max(JtJ(k, k), 1e-12);
    }
    const Vec delta = damped.ldlt().solve(-g);
    if (!delta.allFinite()) break;
    if (step_fn(delta, cost)) {
      current = residual_fn();
      if (!current) break;
      cost = SumSquares(current->residuals);
      lambda = std::max(lambda / 10.0, 1e-12);
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
  }
}

}  // namespace

double RefinementObjective(const ModelHypothesis& model,
                           const std::vector<PointPair>& inliers) {
  if (model.kind == ModelKind::kEssential) {
    double sum = 0.0;
    for (const auto& m : inliers) {
      const Eigen::Vector3d x1 = Homogeneous(m.p1);
      const Eigen::Vector3d x2 = Homogeneous(m.p2);
      const Eigen::Vector3d l2 = model.M * x1;
      const Eigen::Vector3d l1 = model.M.transpose() * x2;
      const double D = l2.head<2>().squaredNorm() + l1.head<2>().squaredNorm();
      if (D <= 0.0) continue;
      const double a = x2.dot(l2);
      sum += a * a / D;
    }
    return sum;
  }
  try {
    return SumSquares(internal::HomographyResiduals(model.M, inliers).residuals);
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

ModelHypothesis RefinePoseNonlinear(const ModelHypothesis& model,
                                    const std::vector<PointPair>& inliers,
                                    const RefinementOptions& options) {
  if (model.kind == ModelKind::kEssential) {
    if (inliers.size() < 8) return model;
    RelativePose pose;
    if (model.pose) {
      pose = *model.pose;
    } else {
      try {
        pose = DecomposeEssentialByVote(model.M, inliers);
      } catch (const Error&) {
        return model;
      }
    }
    const RelativePose start = pose;
    auto residual_fn = [&]() -> std::optional<internal::ResidualJacobian> {
      return internal::EssentialResiduals(pose, inliers);
    };
    auto step_fn = [&](const Eigen::Matrix<double, 5, 1>& delta, double cost) {
      const RelativePose candidate = internal::EssentialChartPoint(pose, delta);
      const double new_cost =
          SumSquares(internal::EssentialResiduals(candidate, inliers).residuals);
      if (new_cost < cost) {
        pose = candidate;
        return true;
      }
      return false;
    };
    LevenbergMarquardt<5>(residual_fn, step_fn, options);
    if (pose.R == start.R && pose.t == start.t) return model;
    const RelativePose refined = RelativePose::Make(pose.R, pose.t);
    ModelHypothesis out =
        ModelHypothesis::Essential(ComposeEssential(refined), refined);
    if (RefinementObjective(out, inliers) > RefinementObjective(model, inliers)) {
      return model;
    }
    return out;
  }

  if (inliers.size() < 4) return model;
  const double h33 = model.M(2, 2);
  if (std::abs(h33) < 1e-8 * model.M.norm()) return model;
  Eigen::Matrix3d H = model.M / std::abs(h33);
  const Eigen::Matrix3d start = H;
  auto residual_fn = [&]() -> std::optional<internal::ResidualJacobian> {
    try {
      return internal::HomographyResiduals(H, inliers);
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  auto step_fn = [&](const Eigen::Matrix<double, 8, 1>& delta, double cost) {
    const Eigen::Matrix3d candidate = internal::HomographyChartPoint(H, delta);
    try {
      const double new_cost = SumSquares(
          internal::HomographyResiduals(candidate, inliers).residuals);
      if (new_cost < cost) {
        H = candidate;
        return true;
      }
    } catch (const Error&) {
    }
    return false;
  };
  LevenbergMarquardt<8>(residual_fn, step_fn, options);
  if (H == start) return model;
  ModelHypothesis out = ModelHypothesis::Homography(H);
  if (RefinementObjective(out, inliers) > RefinementObjective(model, inliers)) {
    return model;
  }
  return out;
}

}  // namespace affineglue
