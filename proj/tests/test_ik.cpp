#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Cholesky>

#include "posefield/distance_field.hpp"
#include "posefield/ik.hpp"
#include "posefield/pose_corpus.hpp"
#include "posefield/so3.hpp"
#include "test_helpers.hpp"

using namespace posefield;
using namespace posefield::testing;

namespace {

RowMatrixXd random_rows(const RobotModel& robot, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  RowMatrixXd m(n, robot.n_joints());
  for (Eigen::Index i = 0; i < n; ++i) m.row(i) = random_valid_config(robot, eng).transpose();
  return m;
}

// Field that must never be consulted: proves code paths skip it.
class ForbiddenField : public PoseField {
 public:
  explicit ForbiddenField(Eigen::Index n) : n_(n) {}
  Eigen::Index dim() const override { return n_; }
  double value(const Eigen::VectorXd&) const override {
    FAIL("field value consulted");
    return 0.0;
  }
  Eigen::VectorXd gradient(const Eigen::VectorXd&) const override {
    FAIL("field gradient consulted");
    return Eigen::VectorXd::Zero(n_);
  }

 private:
  Eigen::Index n_;
};

KeypointTarget position_target(int joint, const Eigen::Vector3d& p, double w = 1.0) {
  KeypointTarget t;
  t.joint_index = joint;
  t.position = p;
  t.position_weight = w;
  return t;
}

}  // namespace

TEST_SUITE("ik") {

TEST_CASE("residuals stack per target: position rows, then orientation rows") {
  const RobotModel robot = planar_two_link();
  Eigen::VectorXd q(2);
  q << M_PI / 2, 0.0;  // elbow frame sits at (0, 1, 0) facing +y

  KeypointTarget full;
  full.joint_index = 1;
  full.position = Eigen::Vector3d(0.5, 1.5, 0.0);
  full.position_weight = 2.0;
  full.orientation = exp_so3(Eigen::Vector3d::UnitZ(), M_PI / 2 + 0.3);
  full.orientation_weight = 3.0;

  const std::vector<KeypointTarget> targets = {position_target(0, Eigen::Vector3d::Zero()), full};
  const Eigen::VectorXd r = task_residual(robot, q, targets);
  REQUIRE(r.size() == 9);

  // Target 0: shoulder frame is exactly at the origin.
  CHECK(r.segment<3>(0).norm() < 1e-12);
  // Target 1 position block: 2 * ((0,1,0) - (0.5,1.5,0)).
  CHECK(r[3] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(r[4] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(r[5] == doctest::Approx(0.0).epsilon(1e-12));
  // Target 1 orientation block: 3 * log(Rz(pi/2) * Rz(pi/2 + 0.3)^T).
  CHECK(r[6] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r[7] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r[8] == doctest::Approx(-0.9).epsilon(1e-10));

  const TaskSystem sys = task_jacobian(robot, q, targets);
  CHECK(sys.jacobian.rows() == 9);
  CHECK(sys.jacobian.cols() == 2);
  CHECK((sys.residual - r).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("the task jacobian matches central finite differences") {
  const RobotModel robot = serial_chain(6);
  std::mt19937_64 eng(31);
  const double h = 1e-6;

  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::VectorXd q = random_valid_config(robot, eng);
    Eigen::VectorXd q_near = q;
    for (int i = 0; i < 6; ++i) q_near[i] += 0.1 * (i % 2 ? 1 : -1);
    q_near = clamp_to_limits(robot, q_near);
    const auto frames = forward_kinematics(robot, q_near);
    const auto frames_at_q = forward_kinematics(robot, q);

    // Orientation rows of the geometric jacobian are the derivative of the
    // log residual only where the rotation error vanishes, so the orientation
    // target sits at the evaluation point. Position targets are arbitrary.
    KeypointTarget tip;
    tip.joint_index = 5;
    tip.position = frames[5].position;
    tip.orientation = frames_at_q[5].orientation;
    tip.position_weight = 1.5;
    tip.orientation_weight = 0.75;
    const std::vector<KeypointTarget> targets = {tip,
                                                 position_target(3, frames[3].position, 2.0)};

    const TaskSystem sys = task_jacobian(robot, q, targets);
    for (int i = 0; i < 6; ++i) {
      Eigen::VectorXd qp = q, qm = q;
      qp[i] += h;
      qm[i] -= h;
      const Eigen::VectorXd fd =
          (task_residual(robot, qp, targets) - task_residual(robot, qm, targets)) / (2.0 * h);
      CHECK((sys.jacobian.col(i) - fd).cwiseAbs().maxCoeff() <= 1e-5);
    }
  }
}

TEST_CASE("joints outside a target's chain get zero jacobian columns") {
  const RobotModel robot = forked_tree();
  Eigen::VectorXd q(5);
  q << 0.3, -0.4, 0.5, 0.2, -0.1;

  const auto frames = forward_kinematics(robot, q);
  KeypointTarget left_tip;
  left_tip.joint_index = 3;  // chain is 0 -> 1 -> 3
  left_tip.position = frames[3].position + Eigen::Vector3d(0.1, 0.0, 0.0);
  left_tip.orientation = frames[3].orientation;

  const TaskSystem sys = task_jacobian(robot, q, {left_tip});
  CHECK((sys.jacobian.col(2).array() == 0.0).all());  // right branch
  CHECK((sys.jacobian.col(4).array() == 0.0).all());  // right tip
  CHECK(sys.jacobian.col(0).cwiseAbs().maxCoeff() > 0.0);
  CHECK(sys.jacobian.col(1).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("a zero residual produces an exactly zero step") {
  const RobotModel robot = serial_chain(4);
  std::mt19937_64 eng(32);
  const Eigen::VectorXd q = random_valid_config(robot, eng);
  const auto frames = forward_kinematics(robot, q);

  KeypointTarget t;
  t.joint_index = 3;
  t.position = frames[3].position;  // already satisfied

  const PoseCorpus corpus = build_corpus(robot, random_rows(robot, 10, 33));
  const OracleField field(corpus);
  const Eigen::VectorXd dq = hlik_step(robot, field, q, {t}, IkWeights{});
  CHECK((dq.array() == 0.0).all());
}

TEST_CASE("with no prior weight the step is plain damped least squares, bitwise") {
  const RobotModel robot = serial_chain(5);
  std::mt19937_64 eng(34);
  const Eigen::VectorXd q = random_valid_config(robot, eng);
  const auto target_frames = forward_kinematics(robot, random_valid_config(robot, eng));

  KeypointTarget t;
  t.joint_index = 4;
  t.position = target_frames[4].position;
  t.orientation = target_frames[4].orientation;
  const std::vector<KeypointTarget> targets = {t};

  IkWeights weights;
  weights.lambda_prior = 0.0;

  // The field must not even be evaluated on this path.
  const ForbiddenField field(5);
  const Eigen::VectorXd dq = hlik_step(robot, field, q, targets, weights);

  // Reference computation, spelled out the same way.
  const TaskSystem sys = task_jacobian(robot, q, targets);
  const Eigen::Index n = robot.n_joints();
  const Eigen::MatrixXd a = weights.w_task * (sys.jacobian.transpose() * sys.jacobian) +
                            (weights.lambda_smooth + weights.damping) *
                                Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd b = -(weights.w_task * (sys.jacobian.transpose() * sys.residual));
  Eigen::VectorXd expected = Eigen::LDLT<Eigen::MatrixXd>(a).solve(b);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Joint& j = robot.joints[static_cast<std::size_t>(i)];
    double d = std::clamp(expected[i], -weights.max_step, weights.max_step);
    expected[i] = std::clamp(d, j.lo - q[i], j.hi - q[i]);
  }
  CHECK((dq - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("steps respect the per-joint cap and the joint limits") {
  const RobotModel robot = serial_chain(4, -0.4, 0.4);
  const Eigen::VectorXd q = Eigen::VectorXd::Constant(4, 0.35);
  KeypointTarget t = position_target(3, Eigen::Vector3d(-1.0, -1.0, 0.5), 50.0);

  const PoseCorpus corpus = build_corpus(robot, RowMatrixXd::Zero(1, 4));
  const OracleField field(corpus);
  IkWeights weights;
  weights.max_step = 0.1;
  const Eigen::VectorXd dq = hlik_step(robot, field, q, {t}, weights);
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(dq[i]) <= 0.1);
    CHECK(q[i] + dq[i] <= 0.4);
    CHECK(q[i] + dq[i] >= -0.4);
  }
}

TEST_CASE("a huge prior weight forces steps orthogonal to the field gradient") {
  const RobotModel robot = serial_chain(6);
  const PoseCorpus corpus = build_corpus(robot, random_rows(robot, 15, 35));
  const OracleField field(corpus);

  IkWeights weights;
  weights.lambda_prior = 1e6;
  weights.max_step = 10.0;  // keep the cap out of the picture

  std::mt19937_64 eng(36);
  int checked = 0;
  for (int rep = 0; rep < 20; ++rep) {
    // Mid-range configuration and a nearby target keep the step small, so
    // neither the per-joint cap nor the limit clip ever fires.
    Eigen::VectorXd q = 0.5 * random_valid_config(robot, eng);
    const Eigen::VectorXd g = field.gradient(q);
    if (g.norm() == 0.0) continue;

    const auto frames = forward_kinematics(robot, q);
    KeypointTarget t;
    t.joint_index = 5;
    t.position = frames[5].position + Eigen::Vector3d(0.03, -0.05, 0.02);

    const Eigen::VectorXd dq = hlik_step(robot, field, q, {t}, weights);
    if (dq.norm() == 0.0) continue;
    CHECK(std::abs(g.dot(dq)) <= 1e-6 * g.norm() * dq.norm());
    ++checked;
  }
  CHECK(checked >= 15);
}

TEST_CASE("a reachable position target is hit within the iteration budget") {
  const RobotModel robot = serial_chain(6);
  const PoseCorpus corpus = build_corpus(robot, random_rows(robot, 10, 37));
  const OracleField field(corpus);

  IkWeights weights;
  weights.lambda_prior = 0.0;

  std::mt19937_64 eng(38);
  for (int rep = 0; rep < 5; ++rep) {
    // Mid-range goals: a sharply folded chain reached from the straight start
    // can stall in a local minimum, which is not what this test is about.
    const Eigen::VectorXd q_goal = 0.5 * random_valid_config(robot, eng);
    const auto frames = forward_kinematics(robot, q_goal);
    const KeypointTarget t = position_target(5, frames[5].position);

    const Eigen::VectorXd q0 = clamp_to_limits(robot, Eigen::VectorXd::Zero(6));
    const auto [q_sol, report] = solve_frame(robot, field, q0, {t}, weights, 200);

    const auto solved = forward_kinematics(robot, q_sol);
    CHECK((solved[5].position - frames[5].position).norm() < 1e-3);
    CHECK(report.iterations <= 200);
    CHECK(validate(robot, q_sol).ok());
  }
}

TEST_CASE("the pose prior steers redundant solutions toward the corpus") {
  const RobotModel robot = serial_chain(6);
  const RowMatrixXd rows = 0.6 * random_rows(robot, 25, 39);
  const PoseCorpus corpus = build_corpus(robot, rows);
  const OracleField field(corpus);

  IkWeights plain;
  plain.lambda_prior = 0.0;
  // Light prior: the value-descent term trades task error for field descent
  // at equilibrium, so the weight must stay small for both runs to hit the
  // position gate below.
  IkWeights guided;
  guided.lambda_prior = 1e-4;

  int comparable = 0;
  int improved = 0;
  for (int rep = 0; rep < 10; ++rep) {
    // Target the tip position of an actual corpus pose: the task constrains
    // 3 of 6 degrees of freedom and the prior should resolve the rest.
    const Eigen::VectorXd q_ref = rows.row(rep).transpose();
    const auto frames = forward_kinematics(robot, q_ref);
    const KeypointTarget t = position_target(5, frames[5].position);
    const Eigen::VectorXd q0 = clamp_to_limits(robot, Eigen::VectorXd::Zero(6));

    const auto [q_plain, rep_plain] = solve_frame(robot, field, q0, {t}, plain, 150);
    const auto [q_guided, rep_guided] = solve_frame(robot, field, q0, {t}, guided, 150);

    const auto f_plain = forward_kinematics(robot, q_plain);
    const auto f_guided = forward_kinematics(robot, q_guided);
    const double err_plain = (f_plain[5].position - frames[5].position).norm();
    const double err_guided = (f_guided[5].position - frames[5].position).norm();
    if (err_plain >= 5e-3 || err_guided >= 5e-3) continue;

    ++comparable;
    if (field.value(q_guided) <= field.value(q_plain)) ++improved;
  }
  CHECK(comparable >= 7);
  CHECK(improved * 10 >= comparable * 7);  // at least 70% of comparable pairs
}

TEST_CASE("solving from the solution is a fixed point") {
  const RobotModel robot = serial_chain(5);
  const PoseCorpus corpus = build_corpus(robot, random_rows(robot, 12, 40));
  const OracleField field(corpus);

  // Pure task solve: the nearest-neighbor field has a piecewise-constant
  // gradient, so with the prior active the iteration dithers across cell
  // boundaries instead of settling.
  IkWeights weights;
  weights.lambda_prior = 0.0;

  std::mt19937_64 eng(41);
  const Eigen::VectorXd q_goal = 0.6 * random_valid_config(robot, eng);
  const auto frames = forward_kinematics(robot, q_goal);
  const KeypointTarget t = position_target(4, frames[4].position);
  const Eigen::VectorXd q0 = clamp_to_limits(robot, Eigen::VectorXd::Zero(5));

  const auto [first, r1] = solve_frame(robot, field, q0, {t}, weights, 150);
  const auto [second, r2] = solve_frame(robot, field, first, {t}, weights, 150);
  CHECK((second - first).cwiseAbs().maxCoeff() == 0.0);
  CHECK(r2.iterations == 0);

  // The report reflects the returned configuration.
  CHECK(r1.task_residual_norm ==
        doctest::Approx(task_residual(robot, first, {t}).norm()).epsilon(1e-12));
  CHECK(r1.prior_value == doctest::Approx(field.value(first)).epsilon(1e-12));
}

TEST_CASE("retargeting warm-starts each frame from the previous solution") {
  const RobotModel robot = serial_chain(5);
  const PoseCorpus corpus = build_corpus(robot, random_rows(robot, 12, 42));
  const OracleField field(corpus);

  std::mt19937_64 eng(43);
  const Eigen::VectorXd q_goal = 0.6 * random_valid_config(robot, eng);
  const auto frames = forward_kinematics(robot, q_goal);
  const KeypointTarget t = position_target(4, frames[4].position);
  IkWeights weights;
  weights.lambda_prior = 0.0;  // lets frame 0 settle to a strict fixed point

  // The same target repeated: once frame 0 settles, later frames are free.
  const std::vector<std::vector<KeypointTarget>> script(3, std::vector<KeypointTarget>{t});
  const RetargetResult result = retarget_trajectory(robot, field, script, weights, 150);
  REQUIRE(result.configurations.rows() == 3);
  REQUIRE(result.reports.size() == 3);
  CHECK((result.configurations.row(1) - result.configurations.row(0)).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK((result.configurations.row(2) - result.configurations.row(1)).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK(result.reports[1].iterations == 0);

  // A custom start changes where frame 0 begins.
  std::mt19937_64 eng2(44);
  const Eigen::VectorXd custom = random_valid_config(robot, eng2);
  const RetargetResult shifted =
      retarget_trajectory(robot, field, script, IkWeights{}, 0, &custom);
  CHECK((shifted.configurations.row(0).transpose() - custom).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(retarget_trajectory(robot, field, {}, IkWeights{}, 10), EmptyTrajectory);
}

TEST_CASE("per-frame solutions stay within reach of the iteration cap") {
  // With k iterations and per-joint clip m, no joint can move farther than
  // k * m between consecutive frames.
  const RobotModel robot = serial_chain(4);
  const PoseCorpus corpus = build_corpus(robot, random_rows(robot, 8, 45));
  const OracleField field(corpus);

  std::mt19937_64 eng(46);
  std::vector<std::vector<KeypointTarget>> script;
  for (int f = 0; f < 4; ++f) {
    const auto frames = forward_kinematics(robot, random_valid_config(robot, eng));
    script.push_back({position_target(3, frames[3].position)});
  }
  IkWeights weights;
  weights.max_step = 0.05;
  const int iters = 6;
  const RetargetResult result = retarget_trajectory(robot, field, script, weights, iters);

  const Eigen::VectorXd q0 = clamp_to_limits(robot, Eigen::VectorXd::Zero(4));
  Eigen::VectorXd prev = q0;
  for (Eigen::Index f = 0; f < result.configurations.rows(); ++f) {
    const Eigen::VectorXd cur = result.configurations.row(f).transpose();
    CHECK((cur - prev).cwiseAbs().maxCoeff() <= iters * weights.max_step + 1e-12);
    CHECK(validate(robot, cur).ok());
    prev = cur;
  }
}

TEST_CASE("ik inputs are validated") {
  const RobotModel robot = serial_chain(3);
  const PoseCorpus corpus = build_corpus(robot, RowMatrixXd::Zero(1, 3));
  const OracleField field(corpus);
  const Eigen::VectorXd q = Eigen::VectorXd::Zero(3);

  KeypointTarget bad;
  bad.joint_index = 7;
  bad.position = Eigen::Vector3d::Zero();
  CHECK_THROWS_AS(task_residual(robot, q, {bad}), BadTargetIndex);
  bad.joint_index = -1;
  CHECK_THROWS_AS(task_residual(robot, q, {bad}), BadTargetIndex);

  KeypointTarget empty;
  empty.joint_index = 1;
  CHECK_THROWS_AS(task_jacobian(robot, q, {empty}), InvalidParams);

  const KeypointTarget ok = position_target(2, Eigen::Vector3d::Zero());
  CHECK_THROWS_AS(task_residual(robot, Eigen::VectorXd::Zero(5), {ok}), DimensionMismatch);

  IkWeights negative;
  negative.lambda_smooth = -1.0;
  CHECK_THROWS_AS(hlik_step(robot, field, q, {ok}, negative), InvalidParams);
  IkWeights zero_step;
  zero_step.max_step = 0.0;
  CHECK_THROWS_AS(hlik_step(robot, field, q, {ok}, zero_step), InvalidParams);
  CHECK_THROWS_AS(solve_frame(robot, field, q, {ok}, IkWeights{}, -1), InvalidParams);

  const PoseCorpus wide = build_corpus(serial_chain(4), RowMatrixXd::Zero(1, 4));
  const OracleField wide_field(wide);
  CHECK_THROWS_AS(hlik_step(robot, wide_field, q, {ok}, IkWeights{}), DimensionMismatch);
}

}  // TEST_SUITE
