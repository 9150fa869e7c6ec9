#include "posefield/robot_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace posefield {

namespace {

constexpr int kRobotFormatVersion = 1;

Eigen::Vector3d get_vec3(const nlohmann::json& j, const char* key) {
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) {
    throw ParseError(std::string("robot description: '") + key + "' must be an array of 3 reals");
  }
  return Eigen::Vector3d(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

// Intrinsic X-Y-Z: R = Rx(roll) * Ry(pitch) * Rz(yaw).
Rotation rpy_to_rotation(const Eigen::Vector3d& rpy) {
  return exp_so3(Eigen::Vector3d::UnitX(), rpy.x()) *
         exp_so3(Eigen::Vector3d::UnitY(), rpy.y()) *
         exp_so3(Eigen::Vector3d::UnitZ(), rpy.z());
}

}  // namespace

int RobotModel::joint_index(const std::string& joint_name) const {
  for (int i = 0; i < n_joints(); ++i) {
    if (joints[i].name == joint_name) return i;
  }
  return -1;
}

Eigen::VectorXd RobotModel::lower_limits() const {
  Eigen::VectorXd lo(n_joints());
  for (int i = 0; i < n_joints(); ++i) lo[i] = joints[i].lo;
  return lo;
}

Eigen::VectorXd RobotModel::upper_limits() const {
  Eigen::VectorXd hi(n_joints());
  for (int i = 0; i < n_joints(); ++i) hi[i] = joints[i].hi;
  return hi;
}

RobotModel parse_robot(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("robot description: invalid document: ") + e.what());
  }

  RobotModel robot;
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kRobotFormatVersion) {
      throw ParseError("robot description: unsupported format_version " + std::to_string(version));
    }
    robot.name = doc.at("name").get<std::string>();

    const auto& joints = doc.at("joints");
    if (!joints.is_array() || joints.empty()) {
      throw ParseError("robot description: 'joints' must be a non-empty array");
    }

    std::set<std::string> seen_names;
    for (std::size_t i = 0; i < joints.size(); ++i) {
      const auto& jj = joints[i];
      Joint joint;
      joint.name = jj.at("name").get<std::string>();
      joint.parent = jj.at("parent").get<int>();
      joint.axis = get_vec3(jj, "axis");
      joint.origin_translation = get_vec3(jj, "origin_translation");
      joint.origin_rotation_rpy = get_vec3(jj, "origin_rotation_rpy");
      const auto& lim = jj.at("limit");
      if (!lim.is_array() || lim.size() != 2) {
        throw ParseError("robot description: 'limit' must be an array of 2 reals");
      }
      joint.lo = lim[0].get<double>();
      joint.hi = lim[1].get<double>();

      if (!seen_names.insert(joint.name).second) {
        throw ParseError("robot description: duplicate joint name '" + joint.name + "'");
      }
      if (joint.parent < -1 || joint.parent >= static_cast<int>(i)) {
        throw TopologyError("robot description: joint '" + joint.name +
                            "' has parent index " + std::to_string(joint.parent) +
                            " (must be -1 or a preceding joint)");
      }
      if (std::abs(joint.axis.norm() - 1.0) > 1e-9) {
        throw ParseError("robot description: joint '" + joint.name + "' axis must be unit length");
      }
      if (!(joint.lo < joint.hi)) {
        throw LimitError("robot description: joint '" + joint.name + "' has lo >= hi");
      }
      joint.origin_rotation = rpy_to_rotation(joint.origin_rotation_rpy);
      robot.joints.push_back(std::move(joint));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("robot description: missing or mistyped field: ") + e.what());
  }
  return robot;
}

RobotModel load_robot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open robot description '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("failed reading robot description '" + path + "'");
  return parse_robot(buf.str());
}

Eigen::VectorXd clamp_to_limits(const RobotModel& robot, const Eigen::VectorXd& q) {
  if (q.size() != robot.n_joints()) {
    throw DimensionMismatch("clamp_to_limits: configuration length " + std::to_string(q.size()) +
                            " != n_joints " + std::to_string(robot.n_joints()));
  }
  Eigen::VectorXd out(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    out[i] = std::clamp(q[i], robot.joints[i].lo, robot.joints[i].hi);
  }
  return out;
}

LimitReport validate(const RobotModel& robot, const Eigen::VectorXd& q) {
  if (q.size() != robot.n_joints()) {
    throw DimensionMismatch("validate: configuration length " + std::to_string(q.size()) +
                            " != n_joints " + std::to_string(robot.n_joints()));
  }
  LimitReport report;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const Joint& j = robot.joints[i];
    if (q[i] < j.lo) {
      report.violations.emplace_back(static_cast<int>(i), j.lo - q[i]);
    } else if (q[i] > j.hi) {
      report.violations.emplace_back(static_cast<int>(i), q[i] - j.hi);
    }
  }
  return report;
}

std::vector<FramePose> forward_kinematics(const RobotModel& robot, const FramePose& root,
                                          const Eigen::VectorXd& q) {
  if (q.size() != robot.n_joints()) {
    throw DimensionMismatch("forward_kinematics: configuration length " +
                            std::to_string(q.size()) + " != n_joints " +
                            std::to_string(robot.n_joints()));
  }
  std::vector<FramePose> frames(robot.joints.size());
  for (std::size_t i = 0; i < robot.joints.size(); ++i) {
    const Joint& j = robot.joints[i];
    const FramePose& parent = j.parent >= 0 ? frames[static_cast<std::size_t>(j.parent)] : root;
    frames[i].position = parent.position + parent.orientation * j.origin_translation;
    frames[i].orientation = parent.orientation * j.origin_rotation * exp_so3(j.axis, q[i]);
  }
  return frames;
}

std::vector<FramePose> forward_kinematics(const RobotModel& robot, const Eigen::VectorXd& q) {
  return forward_kinematics(robot, FramePose{}, q);
}

}  // namespace posefield
