#include "posefield/so3.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

namespace posefield {

namespace {
constexpr double kUnitAxisTol = 1e-9;
constexpr double kNearPiTol = 1e-6;
constexpr double kSmallAngle = 1e-7;
}  // namespace

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
      -w.y(), w.x(), 0.0;
  return m;
}

Eigen::Vector3d unskew(const Eigen::Matrix3d& m) {
  return Eigen::Vector3d(m(2, 1), m(0, 2), m(1, 0));
}

bool is_rotation(const Rotation& r, double tol) {
  const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).norm();
  return ortho <= tol && r.determinant() > 0.0;
}

void require_rotation(const Rotation& r, double tol) {
  if (!is_rotation(r, tol)) {
    throw NotARotation("matrix is not a rotation (orthonormality or det check failed)");
  }
}

Rotation exp_so3(const Eigen::Vector3d& axis, double angle) {
  if (std::abs(axis.norm() - 1.0) > kUnitAxisTol) {
    throw InvalidParams("exp_so3: axis must be unit length");
  }
  const Eigen::Matrix3d k = skew(axis);
  return Eigen::Matrix3d::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * (k * k);
}

Rotation exp_so3(const AxisAngle& aa) { return exp_so3(aa.axis, aa.angle); }

Eigen::Vector3d log_so3(const Rotation& r) {
  require_rotation(r);
  const double c = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double theta = std::acos(c);
  if (std::abs(theta - M_PI) <= kNearPiTol) {
    throw NearPiSingularity("log_so3: rotation angle within 1e-6 of pi");
  }
  const Eigen::Vector3d v = unskew(r - r.transpose());
  if (theta < kSmallAngle) {
    // r - r^T = 2 sin(theta) [axis]; for tiny theta, v/2 = axis*theta + O(theta^3).
    return 0.5 * v;
  }
  return (theta / (2.0 * std::sin(theta))) * v;
}

double geodesic_distance(const Rotation& a, const Rotation& b) {
  require_rotation(a);
  require_rotation(b);
  return log_so3(a.transpose() * b).norm();
}

double joint_distance(double q, double q2) { return std::abs(q - q2); }

Eigen::Matrix3d project_to_tangent(const Rotation& r, const Eigen::Matrix3d& ambient_grad) {
  require_rotation(r);
  const Eigen::Matrix3d a = r.transpose() * ambient_grad;
  return r * (0.5 * (a - a.transpose()));
}

double axis_tangent_component(const Eigen::Matrix3d& grad, const Rotation& r,
                              const Eigen::Vector3d& axis) {
  require_rotation(r);
  return grad.cwiseProduct(r * skew(axis)).sum();
}

}  // namespace posefield
