#include <doctest.h>

#include <cmath>
#include <random>

#include "posefield/pose_corpus.hpp"
#include "posefield/robot_model.hpp"
#include "test_helpers.hpp"

using namespace posefield;
using namespace posefield::testing;

namespace {

const char* kSingleJoint = R"({
  "format_version": 1,
  "name": "one",
  "joints": [
    {"name": "only", "parent": -1, "axis": [0, 0, 1],
     "origin_translation": [0, 0, 0], "origin_rotation_rpy": [0, 0, 0],
     "limit": [-1.0, 1.0]}
  ]
})";

std::string single_joint_with(const std::string& from, const std::string& to) {
  std::string text = kSingleJoint;
  const auto at = text.find(from);
  REQUIRE(at != std::string::npos);
  return text.replace(at, from.size(), to);
}

}  // namespace

TEST_SUITE("robot_model") {

TEST_CASE("bundled humanoid loads with 29 joints and a valid topology") {
  const RobotModel robot = load_robot(humanoid_path());
  CHECK(robot.n_joints() == 29);
  CHECK(robot.name == "humanoid29");
  for (int i = 0; i < robot.n_joints(); ++i) {
    const Joint& j = robot.joints[static_cast<std::size_t>(i)];
    CHECK(j.parent < i);
    CHECK(j.parent >= -1);
    CHECK(j.lo < j.hi);
    CHECK(j.hi - j.lo < 2 * M_PI);
    CHECK(std::abs(j.axis.norm() - 1.0) < 1e-9);
  }
  CHECK(robot.joint_index("left_knee") == 3);
  CHECK(robot.joint_index("no_such_joint") == -1);
}

TEST_CASE("single-joint description parses") {
  const RobotModel robot = parse_robot(kSingleJoint);
  CHECK(robot.n_joints() == 1);
  CHECK(robot.joints[0].name == "only");
  CHECK(robot.joints[0].parent == -1);
}

TEST_CASE("self-referencing parent index is a topology error") {
  CHECK_THROWS_AS(parse_robot(single_joint_with("\"parent\": -1", "\"parent\": 0")),
                  TopologyError);
}

TEST_CASE("forward parent references and out-of-range parents are rejected") {
  CHECK_THROWS_AS(parse_robot(single_joint_with("\"parent\": -1", "\"parent\": 5")),
                  TopologyError);
  CHECK_THROWS_AS(parse_robot(single_joint_with("\"parent\": -1", "\"parent\": -2")),
                  TopologyError);
}

TEST_CASE("reversed limits are rejected") {
  CHECK_THROWS_AS(parse_robot(single_joint_with("\"limit\": [-1.0, 1.0]",
                                                "\"limit\": [1.0, -1.0]")),
                  LimitError);
  CHECK_THROWS_AS(parse_robot(single_joint_with("\"limit\": [-1.0, 1.0]",
                                                "\"limit\": [1.0, 1.0]")),
                  LimitError);
}

TEST_CASE("non-unit axes, duplicate names, and missing fields are parse errors") {
  CHECK_THROWS_AS(parse_robot(single_joint_with("\"axis\": [0, 0, 1]", "\"axis\": [0, 0, 2]")),
                  ParseError);
  CHECK_THROWS_AS(parse_robot(single_joint_with("\"name\": \"only\", \"parent\": -1,", "")),
                  ParseError);
  CHECK_THROWS_AS(parse_robot("not a document"), ParseError);
  CHECK_THROWS_AS(parse_robot(single_joint_with("\"format_version\": 1", "\"format_version\": 9")),
                  ParseError);

  // Two joints sharing one name.
  RobotModel two = planar_two_link();
  std::string text = R"({"format_version":1,"name":"dup","joints":[
    {"name":"a","parent":-1,"axis":[0,0,1],"origin_translation":[0,0,0],
     "origin_rotation_rpy":[0,0,0],"limit":[-1,1]},
    {"name":"a","parent":0,"axis":[0,0,1],"origin_translation":[1,0,0],
     "origin_rotation_rpy":[0,0,0],"limit":[-1,1]}]})";
  CHECK_THROWS_AS(parse_robot(text), ParseError);
}

TEST_CASE("loading a missing file is an I/O error") {
  CHECK_THROWS_AS(load_robot("/nonexistent/robot.json"), IoError);
}

TEST_CASE("clamping leaves valid configurations unchanged") {
  const RobotModel robot = load_robot(humanoid_path());
  std::mt19937_64 eng(31);
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd q = random_valid_config(robot, eng);
    CHECK((clamp_to_limits(robot, q) - q).norm() == 0.0);
  }
}

TEST_CASE("clamping pins out-of-range components to the nearer bound") {
  const RobotModel robot = planar_two_link();
  Eigen::VectorXd q(2);
  q << robot.joints[0].hi + 0.3, robot.joints[1].lo - 2.0;
  const Eigen::VectorXd c = clamp_to_limits(robot, q);
  CHECK(c[0] == robot.joints[0].hi);
  CHECK(c[1] == robot.joints[1].lo);
  CHECK((clamp_to_limits(robot, c) - c).norm() == 0.0);  // idempotent
  CHECK_THROWS_AS(clamp_to_limits(robot, Eigen::VectorXd::Zero(3)), DimensionMismatch);
}

TEST_CASE("clamping never moves away from any valid configuration") {
  const RobotModel robot = load_robot(humanoid_path());
  std::mt19937_64 eng(32);
  std::uniform_real_distribution<double> wild(-6.0, 6.0);
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::VectorXd q(robot.n_joints());
    for (int i = 0; i < robot.n_joints(); ++i) q[i] = wild(eng);
    const Eigen::VectorXd valid = random_valid_config(robot, eng);
    const Eigen::VectorXd c = clamp_to_limits(robot, q);
    for (int i = 0; i < robot.n_joints(); ++i) {
      CHECK(std::abs(c[i] - valid[i]) <= std::abs(q[i] - valid[i]));
    }
    CHECK(pose_distance(c, valid) <= pose_distance(q, valid));
  }
}

TEST_CASE("validate reports out-of-limit joints with positive amounts") {
  const RobotModel robot = serial_chain(5);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(5);
  CHECK(validate(robot, q).ok());

  q[3] = robot.joints[3].lo - 0.1;
  const LimitReport report = validate(robot, q);
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].first == 3);
  CHECK(report.violations[0].second == doctest::Approx(0.1).epsilon(1e-12));

  q[3] = robot.joints[3].hi;  // closed interval: boundary is valid
  CHECK(validate(robot, q).ok());
  q[3] = robot.joints[3].lo;
  CHECK(validate(robot, q).ok());
}

TEST_CASE("zero configuration stacks the fixed offsets cumulatively") {
  const RobotModel robot = serial_chain(4);
  const auto frames = forward_kinematics(robot, Eigen::VectorXd::Zero(4));
  for (int i = 0; i < 4; ++i) {
    CHECK((frames[static_cast<std::size_t>(i)].position -
           Eigen::Vector3d(0.3 * i, 0.0, 0.0)).norm() < 1e-15);
    CHECK((frames[static_cast<std::size_t>(i)].orientation - Rotation::Identity()).norm() <
          1e-15);
  }
}

TEST_CASE("two-link planar arm reaches the hand-computed tip position") {
  const RobotModel robot = planar_two_link();
  Eigen::VectorXd q(2);
  q << M_PI / 2, 0.0;
  const auto frames = forward_kinematics(robot, q);
  const Eigen::Vector3d tip =
      frames[1].position + frames[1].orientation * Eigen::Vector3d(1, 0, 0);
  CHECK((tip - Eigen::Vector3d(0, 2, 0)).norm() < 1e-12);

  // Planar trigonometry oracle over random configurations.
  std::mt19937_64 eng(33);
  std::uniform_real_distribution<double> angle(-3.0, 3.0);
  for (int rep = 0; rep < 100; ++rep) {
    q << angle(eng), angle(eng);
    const auto f = forward_kinematics(robot, q);
    const Eigen::Vector3d t = f[1].position + f[1].orientation * Eigen::Vector3d(1, 0, 0);
    const Eigen::Vector3d expected(std::cos(q[0]) + std::cos(q[0] + q[1]),
                                   std::sin(q[0]) + std::sin(q[0] + q[1]), 0.0);
    CHECK((t - expected).norm() < 1e-12);
  }
}

TEST_CASE("fixed frame offsets apply the roll-pitch-yaw rotation in x-y-z order") {
  RobotModel robot;
  robot.name = "rpy";
  Joint j = make_joint("only", -1, Eigen::Vector3d::UnitZ(), Eigen::Vector3d::Zero(), -1, 1);
  j.origin_rotation_rpy = Eigen::Vector3d(0.3, -0.5, 1.1);
  // parse_robot normally fills origin_rotation; build the same document.
  const std::string text = R"({"format_version":1,"name":"rpy","joints":[
    {"name":"only","parent":-1,"axis":[0,0,1],"origin_translation":[0,0,0],
     "origin_rotation_rpy":[0.3,-0.5,1.1],"limit":[-1,1]}]})";
  const RobotModel parsed = parse_robot(text);
  const auto frames = forward_kinematics(parsed, Eigen::VectorXd::Zero(1));
  const Rotation expected = exp_so3(Eigen::Vector3d::UnitX(), 0.3) *
                            exp_so3(Eigen::Vector3d::UnitY(), -0.5) *
                            exp_so3(Eigen::Vector3d::UnitZ(), 1.1);
  CHECK((frames[0].orientation - expected).norm() < 1e-14);
}

TEST_CASE("forward kinematics is deterministic") {
  const RobotModel robot = load_robot(humanoid_path());
  std::mt19937_64 eng(34);
  const Eigen::VectorXd q = random_valid_config(robot, eng);
  const auto a = forward_kinematics(robot, q);
  const auto b = forward_kinematics(robot, q);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK((a[i].position - b[i].position).norm() == 0.0);
    CHECK((a[i].orientation - b[i].orientation).norm() == 0.0);
  }
}

TEST_CASE("perturbing a joint only moves frames in its subtree") {
  const RobotModel robot = load_robot(humanoid_path());
  std::mt19937_64 eng(35);
  const Eigen::VectorXd q = random_valid_config(robot, eng);
  const auto base = forward_kinematics(robot, q);

  // Descendant sets from the parent map.
  const int n = robot.n_joints();
  for (const int moved : {3, 14, 21}) {
    Eigen::VectorXd q2 = q;
    q2[moved] = robot.joints[static_cast<std::size_t>(moved)].lo;
    const auto shifted = forward_kinematics(robot, q2);
    for (int i = 0; i < n; ++i) {
      bool in_subtree = false;
      for (int a = i; a >= 0; a = robot.joints[static_cast<std::size_t>(a)].parent) {
        if (a == moved) {
          in_subtree = true;
          break;
        }
      }
      const auto iu = static_cast<std::size_t>(i);
      const double delta = (base[iu].position - shifted[iu].position).norm() +
                           (base[iu].orientation - shifted[iu].orientation).norm();
      if (!in_subtree) {
        CHECK(delta == 0.0);
      }
      // The perturbed joint's own frame must actually move (orientation).
      if (i == moved) CHECK(delta > 1e-12);
    }
  }
}

TEST_CASE("a root pose composes onto every frame from the left") {
  const RobotModel robot = load_robot(humanoid_path());
  std::mt19937_64 eng(36);
  const Eigen::VectorXd q = random_valid_config(robot, eng);

  FramePose root;
  root.position = Eigen::Vector3d(0.4, -1.2, 0.9);
  root.orientation = random_rotation(eng);

  const auto local = forward_kinematics(robot, q);
  const auto world = forward_kinematics(robot, root, q);
  for (std::size_t i = 0; i < local.size(); ++i) {
    CHECK((world[i].position - (root.position + root.orientation * local[i].position)).norm() <
          1e-12);
    CHECK((world[i].orientation - root.orientation * local[i].orientation).norm() < 1e-12);
  }
}

TEST_CASE("configuration length mismatches are rejected") {
  const RobotModel robot = planar_two_link();
  CHECK_THROWS_AS(forward_kinematics(robot, Eigen::VectorXd::Zero(3)), DimensionMismatch);
  CHECK_THROWS_AS(validate(robot, Eigen::VectorXd::Zero(1)), DimensionMismatch);
}

}  // TEST_SUITE
