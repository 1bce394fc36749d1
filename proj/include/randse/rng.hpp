#pragma once

#include <array>
#include <cstdint>

namespace randse {

/// Version tag for the seed-derivation scheme, recorded in run metadata.
inline constexpr const char* kDerivationVersion = "rsd-v1";

/// Named sub-streams; each generator in a replication gets its own stream so
/// draws never interleave across components.
enum class StreamTag : std::uint64_t {
  Error0 = 1,
  Treatment = 2,
  EffectBetween = 3,
  EffectWithin = 4,
  IvEta = 5,
  Aux = 6,
  ControlBase = 32,  // control k uses ControlBase + k
};

/// Counter-style derivation: a stream is a pure function of
/// (base_seed, rep_index, tag), so parallel scheduling cannot affect draws.
std::uint64_t derive_stream_seed(std::uint64_t base_seed, std::uint64_t rep_index,
                                 std::uint64_t tag);

/// xoshiro256++ with splitmix64 seeding. Deterministic across platforms.
class Stream {
 public:
  explicit Stream(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform on [0,1), 53-bit resolution.
  double uniform01();

  /// Uniform on (0,1), never returns an endpoint.
  double uniform_open01();

  /// Standard normal via inverse-CDF sampling (one uniform per draw).
  double normal();

  bool bernoulli(double p);

 private:
  std::array<std::uint64_t, 4> s_;
};

}  // namespace randse
