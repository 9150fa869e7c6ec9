#include "posefield/pose_corpus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "posefield/random.hpp"

namespace posefield {

namespace {

constexpr std::uint64_t kTagMixing = 0x706f7365u;   // synthetic mixing matrix
constexpr std::uint64_t kTagLatent = 0x6c61746eu;   // synthetic latent draws
constexpr std::uint64_t kTagFolds = 0x666f6c64u;    // filter fold assignment

// Shared scalar kernel. Every L1 distance in the library runs through this
// exact accumulation order so stored labels and fresh queries match bitwise.
inline double l1_distance(const double* a, const double* b, Eigen::Index n) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) acc += std::abs(a[j] - b[j]);
  return acc;
}

// Same kernel with an early exit once the partial sum rules the row out.
// acc > best implies the final distance cannot beat or tie `best`.
inline double l1_distance_bounded(const double* a, const double* b, Eigen::Index n, double best) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    acc += std::abs(a[j] - b[j]);
    if (acc > best) return acc;
  }
  return acc;
}

}  // namespace

double pose_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("pose_distance: lengths " + std::to_string(a.size()) + " and " +
                            std::to_string(b.size()));
  }
  return l1_distance(a.data(), b.data(), a.size());
}

PoseCorpus::PoseCorpus(std::string robot_name, RowMatrixXd poses)
    : robot_name_(std::move(robot_name)), poses_(std::move(poses)) {
  const Eigen::Index n = poses_.rows();
  sorted_rows_.resize(static_cast<std::size_t>(n));
  std::iota(sorted_rows_.begin(), sorted_rows_.end(), Eigen::Index{0});
  Eigen::VectorXd sums = poses_.rowwise().sum();
  std::sort(sorted_rows_.begin(), sorted_rows_.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (sums[a] != sums[b]) return sums[a] < sums[b];
    return a < b;
  });
  sorted_sums_.resize(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < sorted_rows_.size(); ++k) sorted_sums_[k] = sums[sorted_rows_[k]];
}

NearestResult PoseCorpus::nearest(const Eigen::VectorXd& q) const {
  if (q.size() != poses_.cols()) {
    throw DimensionMismatch("nearest: query length " + std::to_string(q.size()) +
                            " != corpus width " + std::to_string(poses_.cols()));
  }
  if (poses_.rows() == 0) throw EmptyCorpus("nearest: corpus has no rows");

  const Eigen::Index n = poses_.rows();
  const Eigen::Index width = poses_.cols();
  double qsum = 0.0;
  for (Eigen::Index j = 0; j < width; ++j) qsum += q[j];

  double best = std::numeric_limits<double>::infinity();
  Eigen::Index best_idx = -1;

  const auto consider = [&](std::size_t k) {
    const Eigen::Index r = sorted_rows_[k];
    const double d = l1_distance_bounded(q.data(), poses_.data() + r * width, width, best);
    if (d < best || (d == best && r < best_idx)) {
      best = d;
      best_idx = r;
    }
  };

  // Walk outward from the query's coordinate sum. |sum(row) - sum(q)| lower-
  // bounds the L1 distance, so a side is exhausted once that bound passes
  // `best` (a later row on the same side can then neither win nor tie).
  const auto begin = sorted_sums_.begin();
  std::size_t right = static_cast<std::size_t>(
      std::lower_bound(begin, sorted_sums_.end(), qsum) - begin);
  std::size_t left = right;  // rows [0, left) below, [right, n) at or above

  for (;;) {
    const double left_gap = left > 0 ? qsum - sorted_sums_[left - 1]
                                     : std::numeric_limits<double>::infinity();
    const double right_gap = right < static_cast<std::size_t>(n)
                                 ? sorted_sums_[right] - qsum
                                 : std::numeric_limits<double>::infinity();
    const double gap = std::min(left_gap, right_gap);
    if (!(gap <= best)) break;  // every unvisited row is strictly worse
    if (left_gap <= right_gap) {
      consider(--left);
    } else {
      consider(right++);
    }
  }
  return {best, best_idx};
}

PoseCorpus build_corpus(const RobotModel& robot, const RowMatrixXd& poses) {
  if (poses.rows() == 0) throw EmptyCorpus("build_corpus: no poses");
  if (poses.cols() != robot.n_joints()) {
    throw DimensionMismatch("build_corpus: pose width " + std::to_string(poses.cols()) +
                            " != n_joints " + std::to_string(robot.n_joints()));
  }
  for (Eigen::Index i = 0; i < poses.rows(); ++i) {
    for (Eigen::Index j = 0; j < poses.cols(); ++j) {
      const Joint& joint = robot.joints[static_cast<std::size_t>(j)];
      const double v = poses(i, j);
      if (!(v >= joint.lo && v <= joint.hi)) {
        throw LimitViolation("build_corpus: pose " + std::to_string(i) + " joint " +
                                 std::to_string(j) + " value " + std::to_string(v) +
                                 " outside [" + std::to_string(joint.lo) + ", " +
                                 std::to_string(joint.hi) + "]",
                             i, j);
      }
    }
  }
  return PoseCorpus(robot.name, poses);
}

NearestResult nearest_distance(const PoseCorpus& corpus, const Eigen::VectorXd& q) {
  return corpus.nearest(q);
}

RowMatrixXd generate_synthetic_corpus(const RobotModel& robot, int latent_dim,
                                      Eigen::Index count, std::uint64_t seed) {
  const int nj = robot.n_joints();
  if (latent_dim < 1 || latent_dim > nj) {
    throw InvalidParams("generate_synthetic_corpus: latent_dim must be in [1, n_joints]");
  }
  if (count < 1) throw InvalidParams("generate_synthetic_corpus: count must be >= 1");

  Eigen::VectorXd center(nj), half_range(nj);
  for (int i = 0; i < nj; ++i) {
    center[i] = 0.5 * (robot.joints[i].lo + robot.joints[i].hi);
    half_range[i] = 0.5 * (robot.joints[i].hi - robot.joints[i].lo);
  }

  // Mixing matrix: Gaussian entries, geometrically decaying column scales,
  // rows normalized so |W * tanh(z)|_i <= 0.6 * half_range_i exactly.
  const double squash_max = std::tanh(1.0);
  std::mt19937_64 weng = make_engine(seed, kTagMixing, 0);
  Eigen::MatrixXd mix(nj, latent_dim);
  for (int i = 0; i < nj; ++i) {
    for (int j = 0; j < latent_dim; ++j) mix(i, j) = normal(weng);
  }
  for (int j = 0; j < latent_dim; ++j) mix.col(j) *= std::pow(0.5, j);
  for (int i = 0; i < nj; ++i) {
    const double mass = mix.row(i).cwiseAbs().sum() * squash_max;
    if (!(mass > 0.0)) throw InvalidParams("generate_synthetic_corpus: degenerate mixing row");
    mix.row(i) *= 0.6 * half_range[i] / mass;
  }

  RowMatrixXd poses(count, nj);
  Eigen::VectorXd z(latent_dim);
  for (Eigen::Index n = 0; n < count; ++n) {
    std::mt19937_64 eng = make_engine(seed, kTagLatent, static_cast<std::uint64_t>(n));
    for (int j = 0; j < latent_dim; ++j) z[j] = std::tanh(uniform(eng, -1.0, 1.0));
    Eigen::VectorXd q = center + mix * z;
    for (int i = 0; i < nj; ++i) {
      poses(n, i) = std::clamp(q[i], robot.joints[i].lo, robot.joints[i].hi);
    }
  }
  return poses;
}

FilterResult filter_positives(const RowMatrixXd& poses, int folds, double quantile,
                              std::uint64_t seed) {
  const Eigen::Index n = poses.rows();
  if (folds < 2 || folds > n) {
    throw TooFewRows("filter_positives: need 2 <= folds <= rows, got folds " +
                     std::to_string(folds) + " with " + std::to_string(n) + " rows");
  }
  if (!(quantile > 0.0 && quantile <= 1.0)) {
    throw InvalidParams("filter_positives: quantile must be in (0, 1]");
  }

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::mt19937_64 eng = make_engine(seed, kTagFolds, 0);
  shuffle_indices(perm, eng);
  std::vector<int> fold(static_cast<std::size_t>(n));
  for (std::size_t t = 0; t < perm.size(); ++t) {
    fold[static_cast<std::size_t>(perm[t])] = static_cast<int>(t % static_cast<std::size_t>(folds));
  }

  const Eigen::Index width = poses.cols();
  std::vector<double> dist(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (fold[static_cast<std::size_t>(j)] == fold[static_cast<std::size_t>(i)]) continue;
      const double d =
          l1_distance_bounded(poses.data() + i * width, poses.data() + j * width, width, best);
      if (d < best) best = d;
    }
    dist[static_cast<std::size_t>(i)] = best;
  }

  std::vector<double> sorted = dist;
  std::sort(sorted.begin(), sorted.end());
  const auto rank = std::min<std::size_t>(
      sorted.size() - 1, static_cast<std::size_t>(quantile * static_cast<double>(n)));
  const double threshold = sorted[rank];

  FilterResult result;
  result.threshold = threshold;
  std::vector<Eigen::Index> kept_rows;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (dist[static_cast<std::size_t>(i)] > threshold) {
      result.rejected.push_back(i);
    } else {
      kept_rows.push_back(i);
    }
  }
  result.kept.resize(static_cast<Eigen::Index>(kept_rows.size()), width);
  for (std::size_t k = 0; k < kept_rows.size(); ++k) {
    result.kept.row(static_cast<Eigen::Index>(k)) = poses.row(kept_rows[k]);
  }
  return result;
}

}  // namespace posefield
