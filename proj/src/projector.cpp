#include "posefield/projector.hpp"

#include <cmath>

namespace posefield {

namespace {
constexpr int kMaxHalvings = 32;
}

ProjectionTrace project_to_manifold(const RobotModel& robot, const PoseField& field,
                                    const Eigen::VectorXd& q0, const ProjectionConfig& cfg) {
  if (field.dim() != robot.n_joints()) {
    throw DimensionMismatch("project_to_manifold: field dimension != robot n_joints");
  }
  if (q0.size() != robot.n_joints()) {
    throw DimensionMismatch("project_to_manifold: start length != robot n_joints");
  }
  if (!(cfg.step_size > 0.0)) throw InvalidParams("project_to_manifold: step_size must be > 0");
  if (cfg.max_iters < 1) throw InvalidParams("project_to_manifold: max_iters must be >= 1");
  if (!(cfg.stop_distance > 0.0)) {
    throw InvalidParams("project_to_manifold: stop_distance must be > 0");
  }
  if (!(cfg.grad_floor > 0.0)) throw InvalidParams("project_to_manifold: grad_floor must be > 0");

  ProjectionTrace trace;
  Eigen::VectorXd q = q0;
  double f = field.value(q);
  trace.iterates.push_back(q);
  trace.field_values.push_back(f);
  trace.status = ProjectionStatus::kMaxIters;

  double step = cfg.step_size;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    if (f <= cfg.stop_distance) {
      trace.status = ProjectionStatus::kConverged;
      return trace;
    }
    const Eigen::VectorXd grad = field.gradient(q);
    const double gnorm = grad.norm();
    if (gnorm <= cfg.grad_floor) {
      trace.status = ProjectionStatus::kGradientVanished;
      return trace;
    }

    const Eigen::VectorXd direction = grad / gnorm;
    Eigen::VectorXd cand;
    double f_cand = 0.0;
    for (int halving = 0;; ++halving) {
      cand = clamp_to_limits(robot, q - (step * f) * direction);
      f_cand = field.value(cand);
      if (f_cand <= f || halving >= kMaxHalvings) break;
      step *= 0.5;
    }
    q = std::move(cand);
    f = f_cand;
    trace.iterates.push_back(q);
    trace.field_values.push_back(f);
  }
  if (f <= cfg.stop_distance) trace.status = ProjectionStatus::kConverged;
  return trace;
}

std::vector<ProjectionTrace> denoise_batch(const RobotModel& robot, const PoseField& field,
                                           const std::vector<Eigen::VectorXd>& starts,
                                           const ProjectionConfig& cfg) {
  std::vector<ProjectionTrace> traces;
  traces.reserve(starts.size());
  for (const auto& q0 : starts) {
    traces.push_back(project_to_manifold(robot, field, q0, cfg));
  }
  return traces;
}

}  // namespace posefield
