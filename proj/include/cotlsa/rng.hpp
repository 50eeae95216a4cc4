#pragma once

#include <cstdint>

namespace cotlsa {

// Deterministic random stream.
//
// Generator: xoshiro256** seeded by four successive splitmix64 outputs of the
// seed. Uniforms take the top 53 bits. Normals use the basic Box–Muller
// transform (u1 in (0,1], u2 in [0,1)) and return the cosine branch first, the
// cached sine branch second.
//
// Streams are never shared between threads. Parallel work derives a child
// stream per work item with split(index); the child seed is
// splitmix64(seed ^ splitmix64(index + 0x9E3779B97F4A7C15)), so the sample
// consumed by item i does not depend on how items are scheduled.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept;
  double uniform() noexcept;  // [0, 1)
  double normal() noexcept;   // N(0, 1)
  // Chi-square with `dof` degrees of freedom (Marsaglia–Tsang gamma sampler).
  double chi_square(double dof) noexcept;

  RngStream split(std::uint64_t index) const noexcept;

 private:
  double gamma(double shape) noexcept;

  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_cached_ = false;
  double cached_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Seed of the index-th child of `seed`; identical to RngStream(seed).split(index).seed().
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

}  // namespace cotlsa
