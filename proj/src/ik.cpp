#include "posefield/ik.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Geometry>

namespace posefield {

namespace {

constexpr double kStepTol = 1e-10;  // infinity-norm threshold for a converged step

void check_targets(const RobotModel& robot, const std::vector<KeypointTarget>& targets) {
  for (const auto& t : targets) {
    if (t.joint_index < 0 || t.joint_index >= robot.n_joints()) {
      throw BadTargetIndex("keypoint target joint index " + std::to_string(t.joint_index) +
                           " out of range [0, " + std::to_string(robot.n_joints()) + ")");
    }
    if (!t.position.has_value() && !t.orientation.has_value()) {
      throw InvalidParams("keypoint target must set a position, an orientation, or both");
    }
  }
}

Eigen::Index count_rows(const std::vector<KeypointTarget>& targets) {
  Eigen::Index rows = 0;
  for (const auto& t : targets) {
    if (t.position) rows += 3;
    if (t.orientation) rows += 3;
  }
  return rows;
}

// Joints that move target frame j: j itself and its ancestors.
std::vector<bool> chain_mask(const RobotModel& robot, int j) {
  std::vector<bool> mask(static_cast<std::size_t>(robot.n_joints()), false);
  for (int i = j; i >= 0; i = robot.joints[static_cast<std::size_t>(i)].parent) {
    mask[static_cast<std::size_t>(i)] = true;
  }
  return mask;
}

void check_weights(const IkWeights& w) {
  if (!(w.w_task >= 0.0) || !(w.lambda_smooth >= 0.0) || !(w.lambda_prior >= 0.0) ||
      !(w.damping >= 0.0)) {
    throw InvalidParams("ik weights must be non-negative");
  }
  if (!(w.max_step > 0.0)) throw InvalidParams("ik max_step must be positive");
}

// Clips a raw step to the per-joint bound and the limit box around q.
void clip_step(const RobotModel& robot, const Eigen::VectorXd& q, double max_step,
               Eigen::VectorXd& dq) {
  for (Eigen::Index i = 0; i < dq.size(); ++i) {
    const Joint& j = robot.joints[static_cast<std::size_t>(i)];
    double d = std::clamp(dq[i], -max_step, max_step);
    d = std::clamp(d, j.lo - q[i], j.hi - q[i]);
    dq[i] = d;
  }
}

double frame_cost(const RobotModel& robot, const Eigen::VectorXd& q,
                  const std::vector<KeypointTarget>& targets, const IkWeights& w, double f) {
  const Eigen::VectorXd r = task_residual(robot, q, targets);
  return 0.5 * w.w_task * r.squaredNorm() + w.lambda_prior * f;
}

}  // namespace

TaskSystem task_jacobian(const RobotModel& robot, const Eigen::VectorXd& q,
                         const std::vector<KeypointTarget>& targets) {
  check_targets(robot, targets);
  const auto frames = forward_kinematics(robot, q);  // validates q length
  const int joints = robot.n_joints();

  TaskSystem sys;
  const Eigen::Index rows = count_rows(targets);
  sys.jacobian = Eigen::MatrixXd::Zero(rows, joints);
  sys.residual.resize(rows);

  Eigen::Index row = 0;
  for (const auto& t : targets) {
    const auto ju = static_cast<std::size_t>(t.joint_index);
    const std::vector<bool> mask = chain_mask(robot, t.joint_index);

    if (t.position) {
      const Eigen::Vector3d err = frames[ju].position - *t.position;
      sys.residual.segment<3>(row) = t.position_weight * err;
      for (int i = 0; i < joints; ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        const auto iu = static_cast<std::size_t>(i);
        const Eigen::Vector3d axis_w = frames[iu].orientation * robot.joints[iu].axis;
        const Eigen::Vector3d lever = frames[ju].position - frames[iu].position;
        sys.jacobian.block<3, 1>(row, i) = t.position_weight * axis_w.cross(lever);
      }
      row += 3;
    }
    if (t.orientation) {
      const Eigen::Vector3d err = log_so3(frames[ju].orientation * t.orientation->transpose());
      sys.residual.segment<3>(row) = t.orientation_weight * err;
      for (int i = 0; i < joints; ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        const auto iu = static_cast<std::size_t>(i);
        const Eigen::Vector3d axis_w = frames[iu].orientation * robot.joints[iu].axis;
        sys.jacobian.block<3, 1>(row, i) = t.orientation_weight * axis_w;
      }
      row += 3;
    }
  }
  return sys;
}

Eigen::VectorXd task_residual(const RobotModel& robot, const Eigen::VectorXd& q,
                              const std::vector<KeypointTarget>& targets) {
  check_targets(robot, targets);
  const auto frames = forward_kinematics(robot, q);
  Eigen::VectorXd r(count_rows(targets));
  Eigen::Index row = 0;
  for (const auto& t : targets) {
    const auto ju = static_cast<std::size_t>(t.joint_index);
    if (t.position) {
      r.segment<3>(row) = t.position_weight * (frames[ju].position - *t.position);
      row += 3;
    }
    if (t.orientation) {
      r.segment<3>(row) =
          t.orientation_weight * log_so3(frames[ju].orientation * t.orientation->transpose());
      row += 3;
    }
  }
  return r;
}

Eigen::VectorXd hlik_step(const RobotModel& robot, const PoseField& field,
                          const Eigen::VectorXd& q, const std::vector<KeypointTarget>& targets,
                          const IkWeights& weights) {
  check_weights(weights);
  if (field.dim() != robot.n_joints()) {
    throw DimensionMismatch("hlik_step: field dimension != robot n_joints");
  }
  const TaskSystem sys = task_jacobian(robot, q, targets);
  const Eigen::Index n = robot.n_joints();

  Eigen::MatrixXd a = weights.w_task * (sys.jacobian.transpose() * sys.jacobian) +
                      (weights.lambda_smooth + weights.damping) *
                          Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd b = -(weights.w_task * (sys.jacobian.transpose() * sys.residual));
  if (weights.lambda_prior > 0.0) {
    const Eigen::VectorXd g = field.gradient(q);
    a.noalias() += weights.lambda_prior * (g * g.transpose());
  }

  const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success) {
    throw SingularSystem("hlik_step: normal equations are not solvable");
  }
  Eigen::VectorXd dq = ldlt.solve(b);
  if (!dq.allFinite()) {
    throw SingularSystem("hlik_step: normal equations produced a non-finite step");
  }
  clip_step(robot, q, weights.max_step, dq);
  return dq;
}

std::pair<Eigen::VectorXd, FrameReport> solve_frame(const RobotModel& robot,
                                                    const PoseField& field,
                                                    const Eigen::VectorXd& q_init,
                                                    const std::vector<KeypointTarget>& targets,
                                                    const IkWeights& weights, int max_iters) {
  check_weights(weights);
  if (max_iters < 0) throw InvalidParams("solve_frame: max_iters must be >= 0");
  if (field.dim() != robot.n_joints()) {
    throw DimensionMismatch("solve_frame: field dimension != robot n_joints");
  }
  if (q_init.size() != robot.n_joints()) {
    throw DimensionMismatch("solve_frame: q_init length != robot n_joints");
  }

  const Eigen::Index n = robot.n_joints();
  Eigen::VectorXd q = q_init;
  double f = field.value(q);
  Eigen::VectorXd best_q = q;
  double best_f = f;
  double best_cost = frame_cost(robot, q, targets, weights, f);

  int taken = 0;
  for (int iter = 0; iter < max_iters; ++iter) {
    const TaskSystem sys = task_jacobian(robot, q, targets);
    Eigen::MatrixXd a = weights.w_task * (sys.jacobian.transpose() * sys.jacobian) +
                        (weights.lambda_smooth + weights.damping) *
                            Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd b = -(weights.w_task * (sys.jacobian.transpose() * sys.residual));
    if (weights.lambda_prior > 0.0) {
      const Eigen::VectorXd g = field.gradient(q);
      a.noalias() += weights.lambda_prior * (g * g.transpose());
      b.noalias() -= (weights.lambda_prior * f) * g;  // descend the prior's value, not just its slope
    }

    const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success) {
      throw SingularSystem("solve_frame: normal equations are not solvable");
    }
    Eigen::VectorXd dq = ldlt.solve(b);
    if (!dq.allFinite()) {
      throw SingularSystem("solve_frame: normal equations produced a non-finite step");
    }
    clip_step(robot, q, weights.max_step, dq);
    if (dq.lpNorm<Eigen::Infinity>() < kStepTol) break;

    q = clamp_to_limits(robot, q + dq);
    f = field.value(q);
    ++taken;
    const double cost = frame_cost(robot, q, targets, weights, f);
    if (cost < best_cost) {
      best_cost = cost;
      best_q = q;
      best_f = f;
    }
  }

  FrameReport report;
  report.task_residual_norm = task_residual(robot, best_q, targets).norm();
  report.prior_value = best_f;
  report.iterations = taken;
  return {std::move(best_q), report};
}

RetargetResult retarget_trajectory(const RobotModel& robot, const PoseField& field,
                                   const std::vector<std::vector<KeypointTarget>>& frames,
                                   const IkWeights& weights, int iters_per_frame,
                                   const Eigen::VectorXd* q0) {
  if (frames.empty()) throw EmptyTrajectory("retarget_trajectory: no frames");

  Eigen::VectorXd q = q0 ? *q0 : clamp_to_limits(robot, Eigen::VectorXd::Zero(robot.n_joints()));
  if (q.size() != robot.n_joints()) {
    throw DimensionMismatch("retarget_trajectory: q0 length != robot n_joints");
  }

  RetargetResult result;
  result.configurations.resize(static_cast<Eigen::Index>(frames.size()), robot.n_joints());
  result.reports.reserve(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    auto [solved, report] = solve_frame(robot, field, q, frames[t], weights, iters_per_frame);
    q = std::move(solved);
    result.configurations.row(static_cast<Eigen::Index>(t)) = q.transpose();
    result.reports.push_back(report);
  }
  return result;
}

}  // namespace posefield
