#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace posefield {

// Deterministic random utilities.
//
// Byte-identical reruns are a contract of every seeded operation, so nothing
// here may depend on implementation-defined behavior. std::mt19937_64 output
// is pinned by the standard and is safe; std::uniform_real_distribution and
// friends are not, so the value-level draws are hand-rolled.

// SplitMix64 step. Used as a mixer to derive independent engine seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Collapses (seed, tag, index) into one well-mixed engine seed. Each logical
// sample gets its own stream, so draws are independent of processing order.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  s ^= tag * 0xd1342543de82ef95ull;
  std::uint64_t b = splitmix64(s);
  s ^= index * 0xaf251af3b0f025b5ull;
  std::uint64_t c = splitmix64(s);
  return a ^ (b + 0x9e3779b97f4a7c15ull) ^ c;
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  return std::mt19937_64(derive_stream(seed, tag, index));
}

// Uniform double in [0, 1) with 53 random mantissa bits.
inline double uniform01(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& eng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(eng);
}

// Unbiased integer in [0, bound). Rejection keeps the result exact.
inline std::uint64_t uniform_index(std::mt19937_64& eng, std::uint64_t bound) {
  const std::uint64_t threshold = (-bound) % bound;
  for (;;) {
    const std::uint64_t r = eng();
    if (r >= threshold) return r % bound;
  }
}

// Standard normal via the Marsaglia polar method. The mate variate is
// discarded rather than cached so each call consumes a predictable slice of
// the stream regardless of call history.
inline double normal(std::mt19937_64& eng) {
  for (;;) {
    const double u = 2.0 * uniform01(eng) - 1.0;
    const double v = 2.0 * uniform01(eng) - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) {
      return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }
}

// |N(0, sigma^2)|.
inline double half_normal(std::mt19937_64& eng, double sigma) {
  return std::abs(sigma * normal(eng));
}

inline Eigen::VectorXd normal_vector(std::mt19937_64& eng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(eng);
  return v;
}

// Uniform direction on the (n-1)-sphere: normalized isotropic Gaussian.
inline Eigen::VectorXd unit_vector(std::mt19937_64& eng, Eigen::Index n) {
  for (;;) {
    Eigen::VectorXd v = normal_vector(eng, n);
    const double norm = v.norm();
    if (norm > 1e-12) return v / norm;
  }
}

// In-place Fisher-Yates shuffle, explicit so the permutation is pinned.
template <typename Vec>
inline void shuffle_indices(Vec& idx, std::mt19937_64& eng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_index(eng, i));
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace posefield
