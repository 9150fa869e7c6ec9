#include "posefield/prior_ops.hpp"

#include <algorithm>
#include <cmath>

namespace posefield {

double pose_score(double field_value, const ScoreParams& params) {
  if (!(params.d_bad > params.d_good)) {
    throw InvalidParams("pose_score: d_bad must be greater than d_good");
  }
  const double raw = (field_value - params.d_good) / (params.d_bad - params.d_good);
  return std::clamp(raw, 0.0, 1.0);
}

double pose_prior_reward(double score, double reward_scale) {
  return std::exp(-reward_scale * score);
}

double compose_reward(double task_reward, double track_reward, double prior_reward,
                      const RewardWeights& weights) {
  return weights.task * task_reward + weights.track * track_reward + weights.prior * prior_reward;
}

double compute_d_good(const PoseField& field, const std::vector<Eigen::VectorXd>& reference) {
  if (reference.empty()) throw EmptyTrajectory("compute_d_good: empty reference set");
  double d_good = field.value(reference.front());
  for (std::size_t i = 1; i < reference.size(); ++i) {
    d_good = std::max(d_good, field.value(reference[i]));
  }
  return d_good;
}

TrackingErrors tracking_errors(const RobotModel& robot, const Trajectory& reference,
                               const Trajectory& achieved) {
  if (reference.empty() || achieved.empty()) {
    throw EmptyTrajectory("tracking_errors: empty trajectory");
  }
  if (reference.size() != achieved.size()) {
    throw LengthMismatch("tracking_errors: reference has " + std::to_string(reference.size()) +
                         " frames, achieved has " + std::to_string(achieved.size()));
  }

  const int joints = robot.n_joints();
  const auto frames = static_cast<double>(reference.size());
  Eigen::VectorXd joint_pos_sum = Eigen::VectorXd::Zero(joints);
  Eigen::VectorXd joint_rot_sum = Eigen::VectorXd::Zero(joints);
  double root_pos_sum = 0.0;
  double root_rot_sum = 0.0;

  for (std::size_t t = 0; t < reference.size(); ++t) {
    const auto ref_frames = forward_kinematics(robot, reference[t].q);
    const auto ach_frames = forward_kinematics(robot, achieved[t].q);
    for (int j = 0; j < joints; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      joint_pos_sum[j] += (ref_frames[ju].position - ach_frames[ju].position).norm();
      joint_rot_sum[j] += geodesic_distance(ref_frames[ju].orientation, ach_frames[ju].orientation);
    }
    root_pos_sum += (reference[t].root_position - achieved[t].root_position).norm();
    root_rot_sum += geodesic_distance(reference[t].root_orientation, achieved[t].root_orientation);
  }

  TrackingErrors e;
  e.joint_position = joint_pos_sum.sum() / (frames * joints);
  e.joint_rotation = joint_rot_sum.sum() / (frames * joints);
  e.root_position = root_pos_sum / frames;
  e.root_rotation = root_rot_sum / frames;
  e.position = (joint_pos_sum.sum() / frames + root_pos_sum / frames) / (joints + 1);
  e.rotation = (joint_rot_sum.sum() / frames + root_rot_sum / frames) / (joints + 1);
  return e;
}

}  // namespace posefield
