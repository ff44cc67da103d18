#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace peakprice {

/// What a stream is used for. Part of the stream address so that two
/// consumers never share draws by accident.
enum class StreamPurpose : std::uint64_t {
  Baseline = 1,
  PeakProbabilities = 2,
  ConditionProbe = 3,
  Deviation = 4,
  Verification = 5,
};

/// Counter-based generator addressed by (seed, purpose, index). Draw k of a
/// stream is a pure function of the address and k, so work split across any
/// number of threads sees the same numbers.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index) {
    key_ = mix(seed + kGolden);
    key_ = mix(key_ ^ (static_cast<std::uint64_t>(purpose) * 0xd1342543de82ef95ULL));
    key_ = mix(key_ ^ (index * 0xaf251af3b0f025b5ULL + 0x2545f4914f6cdd1dULL));
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + (++counter_) * kGolden); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1).
  double uniform_open() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  /// Standard exponential.
  double exponential() { return -std::log(uniform_open()); }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace peakprice
