#pragma once

#include <vector>

#include <Eigen/Core>

#include "posefield/distance_field.hpp"
#include "posefield/robot_model.hpp"
#include "posefield/so3.hpp"

namespace posefield {

// Pose-prior shaping for controllers: a field value maps to a score in
// [0, 1] (0 = on the good side of d_good, 1 = at or past d_bad) and the
// score maps to a multiplicative reward factor exp(-scale * score).
struct ScoreParams {
  double d_good = 0.0;       // values at or below this score 0
  double d_bad = 0.4;        // values at or above this score 1
  double reward_scale = 1.0;
};

/// clip((f - d_good) / (d_bad - d_good), 0, 1). InvalidParams unless
/// d_bad > d_good.
double pose_score(double field_value, const ScoreParams& params);

/// exp(-reward_scale * score): 1 at score 0, decaying toward exp(-scale).
double pose_prior_reward(double score, double reward_scale);

struct RewardWeights {
  double task = 0.0;
  double track = 0.0;
  double prior = 0.2;
};

/// Weighted sum of reward terms: task * w.task + track * w.track +
/// prior * w.prior.
double compose_reward(double task_reward, double track_reward, double prior_reward,
                      const RewardWeights& weights);

/// Calibrates d_good as the maximum field value over reference
/// configurations, so every reference pose scores 0 (reward exactly 1).
/// EmptyTrajectory when the reference set is empty.
double compute_d_good(const PoseField& field, const std::vector<Eigen::VectorXd>& reference);

struct TrajectoryFrame {
  Eigen::Vector3d root_position = Eigen::Vector3d::Zero();
  Rotation root_orientation = Rotation::Identity();
  Eigen::VectorXd q;
};

using Trajectory = std::vector<TrajectoryFrame>;

// Tracking error summary between a reference and an achieved trajectory.
// Joint errors are root-local (forward kinematics in the root frame), root
// errors are global, rotation errors use the geodesic metric. Each joint's
// error is averaged over time first; the headline numbers then average the
// per-joint means together with the root mean, weighting all N+1 equally.
struct TrackingErrors {
  double position = 0.0;        // (sum_j mean_t e_j + mean_t e_root) / (N + 1)
  double rotation = 0.0;
  double joint_position = 0.0;  // mean over joints of mean_t e_j
  double joint_rotation = 0.0;
  double root_position = 0.0;   // mean_t root error
  double root_rotation = 0.0;
};

/// Frame counts must match (LengthMismatch), trajectories must be non-empty
/// (EmptyTrajectory), configurations must match the robot
/// (DimensionMismatch).
TrackingErrors tracking_errors(const RobotModel& robot, const Trajectory& reference,
                               const Trajectory& achieved);

}  // namespace posefield
