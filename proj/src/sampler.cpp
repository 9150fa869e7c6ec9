#include "posefield/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>
#include <vector>

#include "posefield/random.hpp"

namespace posefield {

namespace {

constexpr std::uint64_t kTagOn = 0x6f6eu;
constexpr std::uint64_t kTagNear = 0x6e656172u;
constexpr std::uint64_t kTagInterp = 0x6c657270u;
constexpr std::uint64_t kTagNearSigma = 0x7369676du;
constexpr std::uint64_t kTagMixShuffle = 0x73687566u;
constexpr std::uint64_t kTagAudit = 0x61756474u;
constexpr std::uint64_t kTagShellEps = 0x657073u;
constexpr std::uint64_t kTagShellMag = 0x6d6167u;

void require_nonempty(const PoseCorpus& corpus, const char* who) {
  if (corpus.size() == 0) throw EmptyCorpus(std::string(who) + ": corpus has no rows");
}

// Runs fn(i) for i in [0, n), split into contiguous chunks across `workers`
// threads. Each index writes only its own output slot, so any worker count
// produces the same result as the serial loop.
template <typename Fn>
void for_each_index(Eigen::Index n, int workers, const Fn& fn) {
  const Eigen::Index w = std::clamp<Eigen::Index>(workers, 1, std::max<Eigen::Index>(n, 1));
  if (w == 1) {
    for (Eigen::Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex error_lock;
  auto run_range = [&](Eigen::Index lo, Eigen::Index hi) {
    try {
      for (Eigen::Index i = lo; i < hi; ++i) fn(i);
    } catch (...) {
      const std::lock_guard<std::mutex> hold(error_lock);
      if (!first_error) first_error = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(w) - 1);
  const Eigen::Index chunk = (n + w - 1) / w;
  for (Eigen::Index t = 1; t < w; ++t) {
    const Eigen::Index lo = t * chunk;
    if (lo >= n) break;
    pool.emplace_back(run_range, lo, std::min(n, lo + chunk));
  }
  run_range(0, std::min(n, chunk));
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

std::vector<LabeledSample> sample_on_manifold(const PoseCorpus& corpus, Eigen::Index n,
                                              std::uint64_t seed, int workers) {
  require_nonempty(corpus, "sample_on_manifold");
  if (n < 0) throw InvalidParams("sample_on_manifold: negative count");
  std::vector<LabeledSample> out(static_cast<std::size_t>(n));
  for_each_index(n, workers, [&](Eigen::Index i) {
    std::mt19937_64 eng = make_engine(seed, kTagOn, static_cast<std::uint64_t>(i));
    const auto idx = static_cast<Eigen::Index>(
        uniform_index(eng, static_cast<std::uint64_t>(corpus.size())));
    out[static_cast<std::size_t>(i)] = {corpus.row(idx), 0.0, SampleSource::kOnManifold};
  });
  return out;
}

std::vector<LabeledSample> sample_near_manifold(const RobotModel& robot, const PoseCorpus& corpus,
                                                Eigen::Index n, double sigma, std::uint64_t seed,
                                                int workers) {
  require_nonempty(corpus, "sample_near_manifold");
  if (n < 0) throw InvalidParams("sample_near_manifold: negative count");
  if (!(sigma > 0.0)) throw InvalidParams("sample_near_manifold: sigma must be positive");
  if (corpus.n_joints() != robot.n_joints()) {
    throw DimensionMismatch("sample_near_manifold: corpus width != robot n_joints");
  }

  const Eigen::Index nj = corpus.n_joints();
  std::vector<LabeledSample> out(static_cast<std::size_t>(n));
  for_each_index(n, workers, [&](Eigen::Index i) {
    std::mt19937_64 eng = make_engine(seed, kTagNear, static_cast<std::uint64_t>(i));
    const auto idx = static_cast<Eigen::Index>(
        uniform_index(eng, static_cast<std::uint64_t>(corpus.size())));
    const Eigen::VectorXd u = unit_vector(eng, nj);
    const double r = half_normal(eng, sigma);
    Eigen::VectorXd cand = corpus.row(idx) + r * u;
    for (Eigen::Index j = 0; j < nj; ++j) {
      cand[j] = std::clamp(cand[j], robot.joints[static_cast<std::size_t>(j)].lo,
                           robot.joints[static_cast<std::size_t>(j)].hi);
    }
    const NearestResult nn = corpus.nearest(cand);
    out[static_cast<std::size_t>(i)] = {std::move(cand), nn.distance, SampleSource::kNearManifold};
  });
  return out;
}

std::vector<LabeledSample> sample_interpolated(const PoseCorpus& corpus, Eigen::Index n,
                                               std::uint64_t seed, int workers) {
  require_nonempty(corpus, "sample_interpolated");
  if (n < 0) throw InvalidParams("sample_interpolated: negative count");
  if (corpus.size() < 2) {
    throw CorpusTooSmall("sample_interpolated: need at least 2 corpus rows");
  }

  const Eigen::Index nj = corpus.n_joints();
  std::vector<LabeledSample> out(static_cast<std::size_t>(n));
  for_each_index(n, workers, [&](Eigen::Index i) {
    std::mt19937_64 eng = make_engine(seed, kTagInterp, static_cast<std::uint64_t>(i));
    const auto a = static_cast<Eigen::Index>(
        uniform_index(eng, static_cast<std::uint64_t>(corpus.size())));
    Eigen::Index b = a;
    while (b == a) {
      b = static_cast<Eigen::Index>(uniform_index(eng, static_cast<std::uint64_t>(corpus.size())));
    }
    const double alpha = uniform01(eng);
    const Eigen::VectorXd qa = corpus.row(a);
    const Eigen::VectorXd qb = corpus.row(b);
    Eigen::VectorXd cand = alpha * qa + (1.0 - alpha) * qb;
    // A convex combination stays inside the endpoint box; pin down the last
    // ulp of rounding so candidates are valid under closed limit checks.
    for (Eigen::Index j = 0; j < nj; ++j) {
      cand[j] = std::clamp(cand[j], std::min(qa[j], qb[j]), std::max(qa[j], qb[j]));
    }
    const NearestResult nn = corpus.nearest(cand);
    out[static_cast<std::size_t>(i)] = {std::move(cand), nn.distance, SampleSource::kInterpolated};
  });
  return out;
}

std::vector<LabeledSample> build_training_set(const RobotModel& robot, const PoseCorpus& corpus,
                                              Eigen::Index total, const MixConfig& mix,
                                              std::uint64_t seed, int workers) {
  if (total < 1) throw InvalidParams("build_training_set: total must be >= 1");
  if (mix.on < 0.0 || mix.near < 0.0 || mix.interp < 0.0) {
    throw InvalidParams("build_training_set: mix weights must be non-negative");
  }
  const double wsum = mix.on + mix.near + mix.interp;
  if (!(wsum > 0.0)) throw InvalidParams("build_training_set: mix weights sum to zero");
  if (mix.near > 0.0 && mix.sigmas.empty()) {
    throw InvalidParams("build_training_set: near weight positive but no sigmas");
  }
  for (double s : mix.sigmas) {
    if (!(s > 0.0)) throw InvalidParams("build_training_set: sigmas must be positive");
  }

  // Largest-remainder apportionment: counts are exact and sum to total.
  const double weights[3] = {mix.on / wsum, mix.near / wsum, mix.interp / wsum};
  Eigen::Index counts[3];
  double remainders[3];
  Eigen::Index assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double target = weights[k] * static_cast<double>(total);
    counts[k] = static_cast<Eigen::Index>(std::floor(target));
    remainders[k] = target - std::floor(target);
    assigned += counts[k];
  }
  int order[3] = {0, 1, 2};
  std::stable_sort(order, order + 3, [&](int a, int b) { return remainders[a] > remainders[b]; });
  for (Eigen::Index leftover = total - assigned, k = 0; leftover > 0; --leftover, ++k) {
    ++counts[order[k % 3]];
  }

  std::vector<LabeledSample> all;
  all.reserve(static_cast<std::size_t>(total));

  auto on = sample_on_manifold(corpus, counts[0], derive_stream(seed, kTagOn, 0), workers);
  all.insert(all.end(), std::make_move_iterator(on.begin()), std::make_move_iterator(on.end()));

  if (counts[1] > 0) {
    const auto n_sigmas = static_cast<Eigen::Index>(mix.sigmas.size());
    const Eigen::Index base = counts[1] / n_sigmas;
    const Eigen::Index extra = counts[1] % n_sigmas;
    for (Eigen::Index s = 0; s < n_sigmas; ++s) {
      const Eigen::Index want = base + (s < extra ? 1 : 0);
      auto near = sample_near_manifold(robot, corpus, want, mix.sigmas[static_cast<std::size_t>(s)],
                                       derive_stream(seed, kTagNearSigma,
                                                     static_cast<std::uint64_t>(s)),
                                       workers);
      all.insert(all.end(), std::make_move_iterator(near.begin()),
                 std::make_move_iterator(near.end()));
    }
  }

  auto interp =
      sample_interpolated(corpus, counts[2], derive_stream(seed, kTagInterp, 0), workers);
  all.insert(all.end(), std::make_move_iterator(interp.begin()),
             std::make_move_iterator(interp.end()));

  std::vector<std::size_t> perm(all.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 eng = make_engine(seed, kTagMixShuffle, 0);
  shuffle_indices(perm, eng);
  std::vector<LabeledSample> shuffled(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) shuffled[i] = std::move(all[perm[i]]);
  return shuffled;
}

Eigen::Index audit_labels(const PoseCorpus& corpus, const std::vector<LabeledSample>& samples,
                          double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw InvalidParams("audit_labels: fraction must be in (0, 1]");
  }
  if (samples.empty()) return 0;
  const auto n = static_cast<Eigen::Index>(samples.size());
  const Eigen::Index want = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(fraction * static_cast<double>(n)));

  std::vector<Eigen::Index> perm(samples.size());
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::mt19937_64 eng = make_engine(seed, kTagAudit, 0);
  shuffle_indices(perm, eng);

  Eigen::Index mismatches = 0;
  for (Eigen::Index k = 0; k < want; ++k) {
    const LabeledSample& s = samples[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])];
    if (corpus.nearest(s.q).distance != s.label) ++mismatches;
  }
  return mismatches;
}

ShellDiagnostic gaussian_shell_diagnostic(int dims, double sigma, Eigen::Index n,
                                          std::uint64_t seed) {
  if (dims < 1) throw InvalidParams("gaussian_shell_diagnostic: dims must be >= 1");
  if (!(sigma > 0.0)) throw InvalidParams("gaussian_shell_diagnostic: sigma must be positive");
  if (n < 2) throw InvalidParams("gaussian_shell_diagnostic: need n >= 2");

  double sum_sq = 0.0, sum_norm = 0.0, sum_norm_sq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::mt19937_64 eng = make_engine(seed, kTagShellEps, static_cast<std::uint64_t>(i));
    double sq = 0.0;
    for (int j = 0; j < dims; ++j) {
      const double e = sigma * normal(eng);
      sq += e * e;
    }
    sum_sq += sq;
    const double norm = std::sqrt(sq);
    sum_norm += norm;
    sum_norm_sq += sq;
  }
  double sum_mag = 0.0, sum_mag_sq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::mt19937_64 eng = make_engine(seed, kTagShellMag, static_cast<std::uint64_t>(i));
    const double r = half_normal(eng, sigma);
    sum_mag += r;
    sum_mag_sq += r * r;
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  ShellDiagnostic d;
  d.mean_sq_norm = sum_sq * inv_n;
  const double mean_norm = sum_norm * inv_n;
  const double var_norm = std::max(0.0, sum_norm_sq * inv_n - mean_norm * mean_norm);
  d.cv_naive_norm = std::sqrt(var_norm) / mean_norm;
  const double mean_mag = sum_mag * inv_n;
  const double var_mag = std::max(0.0, sum_mag_sq * inv_n - mean_mag * mean_mag);
  d.cv_decoupled = std::sqrt(var_mag) / mean_mag;
  return d;
}

}  // namespace posefield
