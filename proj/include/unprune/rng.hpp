#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "unprune/errors.hpp"
#include "unprune/tensor.hpp"

namespace unpruning {

namespace detail {
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Counter-based generator: draw i of a stream is mix(key, i), so a stream is
/// fully described by (key, counter) and sub-streams split off without
/// consuming parent draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), key_(detail::mix64(seed)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  /// Independent child stream identified by `stream`. Does not advance *this.
  Rng split(std::uint64_t stream) const {
    Rng child(seed_);
    child.key_ = detail::mix64(key_ ^ detail::mix64(stream + 0x632be59bd9b4e019ULL));
    return child;
  }

  std::uint64_t next_u64() {
    return detail::mix64(key_ ^ detail::mix64(counter_++));
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw InputError("Rng::below: empty range");
    const unsigned __int128 wide = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<std::uint64_t>(wide >> 64);
  }

  /// Standard normal via Box-Muller; consumes two draws per call.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Well-known sub-stream ids so that every purpose draws from its own stream.
enum class Stream : std::uint64_t {
  kData = 1,
  kTestData = 2,
  kSplit = 3,
  kInit = 4,
  kTrain = 5,
  kUnlearn = 6,
  kReinit = 7,
  kMia = 8,
  kOracle = 9,
};

inline Rng substream(const Rng& rng, Stream s) { return rng.split(static_cast<std::uint64_t>(s)); }

template <typename Scalar = double>
VectorX<Scalar> rng_normal(Rng& rng, Eigen::Index n, Scalar mean, Scalar stddev) {
  if (n < 0) throw InputError("rng_normal: negative count");
  if (!(stddev >= Scalar(0))) throw InputError("rng_normal: stddev must be >= 0");
  VectorX<Scalar> out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i) = mean + stddev * static_cast<Scalar>(rng.normal());
  }
  return out;
}

}  // namespace unpruning
