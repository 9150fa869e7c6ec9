#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "posefield/distance_field.hpp"
#include "posefield/pose_corpus.hpp"
#include "posefield/robot_model.hpp"
#include "posefield/so3.hpp"

namespace posefield {

// One keypoint constraint: pull a joint frame toward a world position, a
// world orientation, or both. At least one of the two must be present.
struct KeypointTarget {
  int joint_index = -1;
  std::optional<Eigen::Vector3d> position;
  std::optional<Rotation> orientation;
  double position_weight = 1.0;
  double orientation_weight = 1.0;
};

struct IkWeights {
  double w_task = 1.0;         // task-space residual weight
  double lambda_smooth = 1e-2;  // Tikhonov term on the step
  double lambda_prior = 1e-1;   // pull along the distance field
  double damping = 1e-6;        // extra diagonal regularization
  double max_step = 0.2;        // per-joint step clip, radians
};

// Stacked weighted task system at a configuration: per target, position
// rows (weight * (fk - target)) come first, then orientation rows
// (weight * log(R_fk * R_target^T)). Jacobian columns are zero for joints
// outside the target's ancestor chain.
struct TaskSystem {
  Eigen::MatrixXd jacobian;   // rows x n_joints
  Eigen::VectorXd residual;   // rows
};

/// Geometric Jacobian and residual for a set of keypoint targets.
/// BadTargetIndex on an out-of-range joint index, InvalidParams on a target
/// with neither position nor orientation, DimensionMismatch on q length.
TaskSystem task_jacobian(const RobotModel& robot, const Eigen::VectorXd& q,
                         const std::vector<KeypointTarget>& targets);

/// Residual vector only (same stacking as task_jacobian, cheaper).
Eigen::VectorXd task_residual(const RobotModel& robot, const Eigen::VectorXd& q,
                              const std::vector<KeypointTarget>& targets);

/// One regularized Gauss-Newton step:
///   (w_task J^T J + (lambda_smooth + damping) I + lambda_prior g g^T) dq
///     = -w_task J^T r
/// with g the field gradient at q. The returned step is clipped per joint
/// to [-max_step, max_step] and to the joint limits relative to q. With
/// lambda_prior = 0 the prior term is skipped entirely and the step equals
/// plain damped least squares. Zero residual gives a zero step. Throws
/// SingularSystem when the normal equations cannot be solved.
Eigen::VectorXd hlik_step(const RobotModel& robot, const PoseField& field,
                          const Eigen::VectorXd& q, const std::vector<KeypointTarget>& targets,
                          const IkWeights& weights);

struct FrameReport {
  double task_residual_norm = 0.0;  // ||r||_2 at the returned configuration
  double prior_value = 0.0;         // field value at the returned configuration
  int iterations = 0;               // steps actually taken
};

/// Iterates hlik_step (plus a prior value-descent term on the right-hand
/// side, -lambda_prior * f(q) * g) from q_init and returns the best iterate
/// under cost = 0.5 * w_task * ||r||^2 + lambda_prior * f. Stops early once
/// a clipped step's infinity norm falls below 1e-10, so a warm start at the
/// solution is a fixed point. The returned configuration always satisfies
/// the joint limits (given a valid q_init).
std::pair<Eigen::VectorXd, FrameReport> solve_frame(const RobotModel& robot,
                                                    const PoseField& field,
                                                    const Eigen::VectorXd& q_init,
                                                    const std::vector<KeypointTarget>& targets,
                                                    const IkWeights& weights, int max_iters);

struct RetargetResult {
  RowMatrixXd configurations;        // one row per frame
  std::vector<FrameReport> reports;  // one per frame
};

/// Solves a sequence of per-frame target sets, warm-starting each frame at
/// the previous frame's solution. The first frame starts from q0 when
/// given, otherwise from the clamped zero configuration. EmptyTrajectory
/// when frames is empty.
RetargetResult retarget_trajectory(const RobotModel& robot, const PoseField& field,
                                   const std::vector<std::vector<KeypointTarget>>& frames,
                                   const IkWeights& weights, int iters_per_frame,
                                   const Eigen::VectorXd* q0 = nullptr);

}  // namespace posefield
