#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/SVD>

#include "posefield/pose_corpus.hpp"
#include "test_helpers.hpp"

using namespace posefield;
using namespace posefield::testing;

namespace {

// Reference nearest-neighbor search: full double loop, lowest index on ties.
NearestResult naive_nearest(const RowMatrixXd& poses, const Eigen::VectorXd& q) {
  NearestResult best{std::numeric_limits<double>::infinity(), -1};
  for (Eigen::Index r = 0; r < poses.rows(); ++r) {
    double d = 0.0;
    for (Eigen::Index j = 0; j < poses.cols(); ++j) d += std::abs(poses(r, j) - q[j]);
    if (d < best.distance) {
      best.distance = d;
      best.index = r;
    }
  }
  return best;
}

RowMatrixXd random_rows(const RobotModel& robot, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  RowMatrixXd m(n, robot.n_joints());
  for (Eigen::Index i = 0; i < n; ++i) {
    m.row(i) = random_valid_config(robot, eng).transpose();
  }
  return m;
}

}  // namespace

TEST_SUITE("pose_corpus") {

TEST_CASE("pose distance sums absolute per-joint differences") {
  Eigen::VectorXd a = Eigen::VectorXd::Constant(29, 0.1);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(29);
  CHECK(pose_distance(a, a) == 0.0);
  CHECK(pose_distance(a, b) == doctest::Approx(2.9).epsilon(1e-14));
  CHECK(pose_distance(a, b) == pose_distance(b, a));
  CHECK_THROWS_AS(pose_distance(a, Eigen::VectorXd::Zero(5)), DimensionMismatch);
}

TEST_CASE("pose distance satisfies the triangle inequality") {
  std::mt19937_64 eng(41);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int rep = 0; rep < 200; ++rep) {
    Eigen::VectorXd a(7), b(7), c(7);
    for (int i = 0; i < 7; ++i) {
      a[i] = u(eng);
      b[i] = u(eng);
      c[i] = u(eng);
    }
    CHECK(pose_distance(a, c) <= pose_distance(a, b) + pose_distance(b, c) + 1e-12);
  }
}

TEST_CASE("corpus construction validates rows against joint limits") {
  const RobotModel robot = planar_two_link();
  RowMatrixXd one(1, 2);
  one << 0.5, -0.5;
  const PoseCorpus corpus = build_corpus(robot, one);
  CHECK(corpus.size() == 1);
  CHECK(corpus.robot_name() == "planar2");

  RowMatrixXd bad(2, 2);
  bad << 0.0, 0.0, 0.1, robot.joints[1].hi + 0.2;
  try {
    build_corpus(robot, bad);
    FAIL("expected LimitViolation");
  } catch (const LimitViolation& e) {
    CHECK(e.row == 1);
    CHECK(e.joint == 1);
  }

  CHECK_THROWS_AS(build_corpus(robot, RowMatrixXd(0, 2)), EmptyCorpus);
  CHECK_THROWS_AS(build_corpus(robot, RowMatrixXd::Zero(3, 5)), DimensionMismatch);
}

TEST_CASE("boundary rows are valid corpus members") {
  const RobotModel robot = planar_two_link();
  RowMatrixXd edge(1, 2);
  edge << robot.joints[0].lo, robot.joints[1].hi;
  CHECK(build_corpus(robot, edge).size() == 1);
}

TEST_CASE("nearest picks the closer of two rows") {
  const RobotModel robot = planar_two_link();
  RowMatrixXd poses(2, 2);
  poses << 0.0, 0.0, 1.0, 0.0;
  const PoseCorpus corpus = build_corpus(robot, poses);
  Eigen::VectorXd q(2);
  q << 0.4, 0.0;
  const NearestResult r = nearest_distance(corpus, q);
  CHECK(r.distance == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(r.index == 0);
}

TEST_CASE("querying an exact row returns distance zero at the lowest matching index") {
  const RobotModel robot = serial_chain(4);
  RowMatrixXd poses = random_rows(robot, 10, 42);
  poses.row(7) = poses.row(3);  // duplicate: tie at distance 0
  const PoseCorpus corpus = build_corpus(robot, poses);

  const NearestResult r = nearest_distance(corpus, poses.row(7).transpose());
  CHECK(r.distance == 0.0);
  CHECK(r.index == 3);

  const NearestResult r2 = nearest_distance(corpus, poses.row(5).transpose());
  CHECK(r2.distance == 0.0);
  CHECK(r2.index == 5);
}

TEST_CASE("ties at equal distance resolve to the lowest row index") {
  const RobotModel robot = planar_two_link();
  RowMatrixXd poses(3, 2);
  poses << 0.5, 0.0,   // distance 0.5 from origin
           -0.5, 0.0,  // distance 0.5
           0.0, 0.9;   // distance 0.9
  const PoseCorpus corpus = build_corpus(robot, poses);
  const NearestResult r = nearest_distance(corpus, Eigen::VectorXd::Zero(2));
  CHECK(r.distance == 0.5);
  CHECK(r.index == 0);
}

TEST_CASE("indexed search equals the naive double loop on random queries") {
  const RobotModel robot = load_robot(humanoid_path());
  const RowMatrixXd poses = generate_synthetic_corpus(robot, 4, 2000, 7);
  const PoseCorpus corpus = build_corpus(robot, poses);

  std::mt19937_64 eng(43);
  for (int rep = 0; rep < 500; ++rep) {
    // Mix wild uniform queries with near-corpus queries.
    Eigen::VectorXd q;
    if (rep % 2 == 0) {
      q = random_valid_config(robot, eng);
    } else {
      std::normal_distribution<double> noise(0.0, 0.1);
      q = poses.row(static_cast<Eigen::Index>(eng() % 2000)).transpose();
      for (Eigen::Index i = 0; i < q.size(); ++i) q[i] += noise(eng);
    }
    const NearestResult fast = nearest_distance(corpus, q);
    const NearestResult slow = naive_nearest(poses, q);
    CHECK(fast.distance == slow.distance);
    CHECK(fast.index == slow.index);
  }
}

TEST_CASE("adding a row never increases any nearest distance") {
  const RobotModel robot = serial_chain(6);
  const RowMatrixXd base = random_rows(robot, 50, 44);
  RowMatrixXd larger(51, 6);
  larger.topRows(50) = base;
  larger.row(50) = random_rows(robot, 1, 45);
  const PoseCorpus small = build_corpus(robot, base);
  const PoseCorpus big = build_corpus(robot, larger);

  std::mt19937_64 eng(46);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::VectorXd q = random_valid_config(robot, eng);
    CHECK(nearest_distance(big, q).distance <= nearest_distance(small, q).distance);
  }
}

TEST_CASE("synthetic corpus generation is deterministic in the seed") {
  const RobotModel robot = load_robot(humanoid_path());
  const RowMatrixXd a = generate_synthetic_corpus(robot, 4, 500, 123);
  const RowMatrixXd b = generate_synthetic_corpus(robot, 4, 500, 123);
  const RowMatrixXd c = generate_synthetic_corpus(robot, 4, 500, 124);
  CHECK((a - b).norm() == 0.0);
  CHECK((a - c).norm() != 0.0);
}

TEST_CASE("synthetic corpus has low effective rank and respects limits") {
  const RobotModel robot = load_robot(humanoid_path());
  const RowMatrixXd poses = generate_synthetic_corpus(robot, 4, 10000, 7);
  REQUIRE(poses.rows() == 10000);

  for (Eigen::Index i = 0; i < poses.rows(); ++i) {
    CHECK(validate(robot, poses.row(i).transpose()).ok());
  }

  Eigen::MatrixXd centered = poses;
  centered.rowwise() -= poses.colwise().mean();
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(centered);
  const auto& sv = svd.singularValues();
  REQUIRE(sv.size() >= 5);
  CHECK(sv[4] < 1e-6 * sv[0]);
  CHECK(sv[3] > 1e-3 * sv[0]);  // genuinely four-dimensional, not degenerate
}

TEST_CASE("synthetic corpus spans a budgeted fraction of each joint range") {
  const RobotModel robot = load_robot(humanoid_path());
  const RowMatrixXd poses = generate_synthetic_corpus(robot, 4, 10000, 7);
  for (int j = 0; j < robot.n_joints(); ++j) {
    const double range = robot.joints[static_cast<std::size_t>(j)].hi -
                         robot.joints[static_cast<std::size_t>(j)].lo;
    const double span = poses.col(j).maxCoeff() - poses.col(j).minCoeff();
    CHECK(span <= 0.6 * range + 1e-9);  // the mixing weights are budgeted to 60%
    CHECK(span >= 0.25 * range);        // and a fair share of the budget is realized
  }
}

TEST_CASE("cross-fold filtering keeps homogeneous data and rejects a far outlier") {
  const RobotModel robot = serial_chain(6, -3.0, 3.0);
  std::mt19937_64 eng(47);
  std::normal_distribution<double> tight(0.0, 0.05);

  RowMatrixXd poses(201, 6);
  for (Eigen::Index i = 0; i < 200; ++i) {
    for (int j = 0; j < 6; ++j) poses(i, j) = tight(eng);
  }
  poses.row(200) = Eigen::RowVectorXd::Constant(6, 2.5);  // far outlier

  SUBCASE("high quantile keeps nearly everything") {
    const FilterResult res = filter_positives(poses.topRows(200), 5, 0.99, 9);
    CHECK(res.rejected.size() <= 2);  // at most 1% of 200
    CHECK(res.kept.rows() + static_cast<Eigen::Index>(res.rejected.size()) == 200);
  }

  SUBCASE("the outlier lands in the rejected set") {
    const FilterResult res = filter_positives(poses, 5, 0.95, 9);
    bool outlier_rejected = false;
    for (const Eigen::Index r : res.rejected) outlier_rejected |= (r == 200);
    CHECK(outlier_rejected);
  }

  SUBCASE("kept rows preserve original order") {
    const FilterResult res = filter_positives(poses, 4, 0.9, 9);
    Eigen::Index cursor = 0;
    std::size_t rej = 0;
    for (Eigen::Index i = 0; i < poses.rows(); ++i) {
      if (rej < res.rejected.size() && res.rejected[rej] == i) {
        ++rej;
        continue;
      }
      REQUIRE(cursor < res.kept.rows());
      CHECK((res.kept.row(cursor) - poses.row(i)).norm() == 0.0);
      ++cursor;
    }
    CHECK(cursor == res.kept.rows());
  }

  SUBCASE("filtering is deterministic in the seed") {
    const FilterResult a = filter_positives(poses, 5, 0.95, 9);
    const FilterResult b = filter_positives(poses, 5, 0.95, 9);
    CHECK(a.rejected == b.rejected);
    CHECK((a.kept - b.kept).norm() == 0.0);
  }
}

TEST_CASE("filtering needs at least two folds and rows for every fold") {
  RowMatrixXd poses = RowMatrixXd::Zero(10, 3);
  CHECK_THROWS_AS(filter_positives(poses, 1, 0.9, 1), TooFewRows);
  CHECK_THROWS_AS(filter_positives(poses, 11, 0.9, 1), TooFewRows);
  CHECK_THROWS_AS(filter_positives(poses, 5, 1.5, 1), InvalidParams);
}

}  // TEST_SUITE
