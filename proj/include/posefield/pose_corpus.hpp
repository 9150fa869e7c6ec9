#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "posefield/errors.hpp"
#include "posefield/robot_model.hpp"

namespace posefield {

// Poses are stored one per row; row-major keeps a single pose contiguous for
// the nearest-neighbor scans.
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// L1 distance between two configurations of the same robot. This is the
/// product metric over per-joint geodesic distances: each revolute joint
/// contributes |a_i - b_i|.
double pose_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct NearestResult {
  double distance = 0.0;
  Eigen::Index index = -1;  // lowest index among ties
};

// Immutable set of valid poses plus an index for exact nearest-neighbor
// queries. The index orders rows by coordinate sum: for any row r,
// |sum(r) - sum(q)| <= pose_distance(r, q), so a scan outward from sum(q)
// can stop once the bound exceeds the best distance found. Results are
// identical to a full scan, including tie-breaking.
class PoseCorpus {
 public:
  PoseCorpus() = default;
  PoseCorpus(std::string robot_name, RowMatrixXd poses);

  const std::string& robot_name() const { return robot_name_; }
  const RowMatrixXd& poses() const { return poses_; }
  Eigen::Index size() const { return poses_.rows(); }
  Eigen::Index n_joints() const { return poses_.cols(); }
  Eigen::VectorXd row(Eigen::Index i) const { return poses_.row(i).transpose(); }

  NearestResult nearest(const Eigen::VectorXd& q) const;

 private:
  std::string robot_name_;
  RowMatrixXd poses_;
  std::vector<double> sorted_sums_;        // row sums, ascending
  std::vector<Eigen::Index> sorted_rows_;  // row index per sorted sum
};

/// Validates every row against the robot's limits (closed intervals) and
/// builds the query index. Throws DimensionMismatch on a column-count
/// mismatch, EmptyCorpus when poses has no rows, LimitViolation (with row
/// and joint coordinates) on the first out-of-range entry.
PoseCorpus build_corpus(const RobotModel& robot, const RowMatrixXd& poses);

/// Exact nearest corpus row to q under pose_distance. Ties resolve to the
/// lowest row index. Throws DimensionMismatch on length mismatch.
NearestResult nearest_distance(const PoseCorpus& corpus, const Eigen::VectorXd& q);

/// Draws `count` poses from a smooth low-dimensional family inside the limit
/// box: q = clamp(center + W * tanh(z)), z ~ U([-1,1]^latent_dim). W is a
/// seed-fixed random matrix; its columns carry geometrically decaying scales
/// (dominant-mode structure, like principal components of real pose data) and
/// each row is normalized so poses span about 60% of that joint's range. The
/// centered result has rank <= latent_dim by construction.
RowMatrixXd generate_synthetic_corpus(const RobotModel& robot, int latent_dim,
                                      Eigen::Index count, std::uint64_t seed);

struct FilterResult {
  RowMatrixXd kept;                     // accepted rows, original order
  std::vector<Eigen::Index> rejected;   // indices of dropped rows, ascending
  double threshold = 0.0;               // distance cutoff that was applied
};

/// Cross-fold outlier rejection: rows are dealt into `folds` groups by a
/// seeded shuffle, each row's distance to the nearest row in any *other*
/// fold is computed, and rows whose distance exceeds the nearest-rank
/// `quantile` of those distances are dropped. folds must be in [2, N]
/// (TooFewRows otherwise); quantile must be in (0, 1] (InvalidParams).
FilterResult filter_positives(const RowMatrixXd& poses, int folds, double quantile,
                              std::uint64_t seed);

}  // namespace posefield
