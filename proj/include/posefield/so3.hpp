#pragma once

#include <Eigen/Core>

#include "posefield/errors.hpp"

namespace posefield {

// Rotation matrices are plain Eigen 3x3 matrices. Orthonormality with
// det = +1 (within 1e-9) is a caller-maintained invariant; functions that
// need it start with require_rotation.
using Rotation = Eigen::Matrix3d;

struct AxisAngle {
  Eigen::Vector3d axis;  // unit length
  double angle = 0.0;    // radians
};

/// Cross-product matrix: skew(w) * v == w x v.
Eigen::Matrix3d skew(const Eigen::Vector3d& w);

/// Inverse of skew on antisymmetric matrices.
Eigen::Vector3d unskew(const Eigen::Matrix3d& m);

/// True when R is orthonormal (||R^T R - I||_F <= tol) with positive determinant.
bool is_rotation(const Rotation& r, double tol = 1e-9);

/// Throws NotARotation unless is_rotation(r, tol).
void require_rotation(const Rotation& r, double tol = 1e-9);

/// Rodrigues exponential: I + sin(angle) [axis] + (1 - cos(angle)) [axis]^2.
/// The axis must be unit length within 1e-9, otherwise InvalidParams.
Rotation exp_so3(const Eigen::Vector3d& axis, double angle);

Rotation exp_so3(const AxisAngle& aa);

/// Principal logarithm as a rotation vector (axis * angle, angle in [0, pi)).
/// Throws NearPiSingularity when the rotation angle is within 1e-6 of pi,
/// where the axis is not recoverable from R - R^T.
Eigen::Vector3d log_so3(const Rotation& r);

/// Geodesic (angular) distance ||log(a^T b)||_2. Bi-invariant.
double geodesic_distance(const Rotation& a, const Rotation& b);

/// Distance between two configurations of one revolute joint. Equals the
/// geodesic distance between exp_so3(k, q) and exp_so3(k, q2) for any shared
/// unit axis k while |q - q2| <= pi.
double joint_distance(double q, double q2);

/// Projects an ambient gradient onto the tangent space at r:
/// r * antisym(r^T g) with antisym(a) = (a - a^T) / 2.
Eigen::Matrix3d project_to_tangent(const Rotation& r, const Eigen::Matrix3d& ambient_grad);

/// Frobenius inner product <grad, r * skew(axis)>: the directional derivative
/// along the rotation's motion about a joint axis. Ambient and tangent-
/// projected gradients give the same value here, so downstream code can feed
/// either one.
double axis_tangent_component(const Eigen::Matrix3d& grad, const Rotation& r,
                              const Eigen::Vector3d& axis);

}  // namespace posefield
