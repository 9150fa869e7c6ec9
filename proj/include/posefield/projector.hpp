#pragma once

#include <vector>

#include <Eigen/Core>

#include "posefield/distance_field.hpp"
#include "posefield/robot_model.hpp"

namespace posefield {

struct ProjectionConfig {
  double step_size = 1.0;      // initial step scale; halves whenever a step increases f
  int max_iters = 100;
  double stop_distance = 0.05;  // converged once f <= stop_distance
  double grad_floor = 1e-8;     // stop when ||grad||_2 falls to or below this
};

enum class ProjectionStatus {
  kConverged = 0,
  kMaxIters = 1,
  kGradientVanished = 2,
};

// Full history of one descent: iterates[0] is the start, one entry is
// appended per accepted step, field_values aligns with iterates.
struct ProjectionTrace {
  std::vector<Eigen::VectorXd> iterates;
  std::vector<double> field_values;
  ProjectionStatus status = ProjectionStatus::kMaxIters;

  const Eigen::VectorXd& final_pose() const { return iterates.back(); }
  double final_value() const { return field_values.back(); }
};

/// Projects a configuration toward the field's zero set by damped gradient
/// descent: q <- clamp(q - s * f(q) * grad/||grad||_2), with s halved every
/// time a candidate step increases f (the reduced s persists). Convergence
/// is checked before each step, so a start already at or below
/// stop_distance returns a single-entry trace.
ProjectionTrace project_to_manifold(const RobotModel& robot, const PoseField& field,
                                    const Eigen::VectorXd& q0, const ProjectionConfig& cfg);

/// project_to_manifold over a batch of starts. Results are elementwise
/// identical to individual calls; an empty batch yields an empty result.
std::vector<ProjectionTrace> denoise_batch(const RobotModel& robot, const PoseField& field,
                                           const std::vector<Eigen::VectorXd>& starts,
                                           const ProjectionConfig& cfg);

}  // namespace posefield
