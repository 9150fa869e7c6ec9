#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "posefield/errors.hpp"
#include "posefield/so3.hpp"

namespace posefield {

// One revolute joint. The fixed offset (origin_translation, origin_rotation)
// places the joint frame relative to its parent's moving frame; the joint
// then rotates about `axis` by its angle.
struct Joint {
  std::string name;
  int parent = -1;  // index of parent joint, -1 = attached to the base
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();          // unit length
  Eigen::Vector3d origin_translation = Eigen::Vector3d::Zero();
  Eigen::Vector3d origin_rotation_rpy = Eigen::Vector3d::Zero();
  Rotation origin_rotation = Rotation::Identity();  // precomputed from rpy
  double lo = 0.0;  // closed interval [lo, hi], radians
  double hi = 0.0;
};

// Kinematic forest of revolute joints, topologically ordered (parent index
// strictly below child index). Joint angles stack into a single
// configuration vector q of length n_joints() in joint order.
struct RobotModel {
  std::string name;
  std::vector<Joint> joints;

  int n_joints() const { return static_cast<int>(joints.size()); }

  // Index of the named joint, -1 if absent.
  int joint_index(const std::string& joint_name) const;

  Eigen::VectorXd lower_limits() const;
  Eigen::VectorXd upper_limits() const;
};

struct FramePose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Rotation orientation = Rotation::Identity();
};

// Out-of-range joints with the (positive) amount beyond the nearer bound.
struct LimitReport {
  std::vector<std::pair<int, double>> violations;
  bool ok() const { return violations.empty(); }
};

/// Parses a robot description document (see README for the format). Throws
/// ParseError on malformed or incomplete input, TopologyError on bad parent
/// indices, LimitError when a joint has lo >= hi.
RobotModel parse_robot(const std::string& text);

/// parse_robot on the contents of `path`. Unreadable file -> IoError.
RobotModel load_robot(const std::string& path);

/// Componentwise metric projection onto the limit box.
Eigen::VectorXd clamp_to_limits(const RobotModel& robot, const Eigen::VectorXd& q);

/// Reports every joint outside its closed limit interval. Boundary values
/// are valid.
LimitReport validate(const RobotModel& robot, const Eigen::VectorXd& q);

/// World pose of every joint frame at configuration q. Deterministic: equal
/// inputs give bitwise-equal outputs. Each joint frame is its parent frame
/// composed with the fixed offset and the rotation about the joint axis;
/// joints with parent -1 compose with `root` (the floating base, supplied
/// externally and never optimized here).
std::vector<FramePose> forward_kinematics(const RobotModel& robot, const FramePose& root,
                                          const Eigen::VectorXd& q);

/// forward_kinematics with an identity root, i.e. frames in the base frame.
std::vector<FramePose> forward_kinematics(const RobotModel& robot, const Eigen::VectorXd& q);

}  // namespace posefield
