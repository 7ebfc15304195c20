#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>

namespace dqsim {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based split: the child seed depends only on (root, index), so
// replication r gets the same stream no matter which thread runs it or in
// which order replications are scheduled.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(root) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

// Independent sub-streams inside one replication. Each source of randomness
// draws from its own stream so that changing one policy branch does not shift
// the draws seen by the others.
enum class Stream : std::uint64_t {
  Arrivals = 1,
  Thinning = 2,
  Actions = 3,
  Sampling = 4,
  Service = 5,
  Delay = 6,
  Partition = 7,
};

constexpr std::uint64_t stream_seed(std::uint64_t replication_seed, Stream s) noexcept {
  return derive_seed(replication_seed, static_cast<std::uint64_t>(s));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  // Uniform integer on [0, n). Multiply-shift; bias is below 2^-58 for the
  // sizes used here.
  std::size_t below(std::size_t n) {
    __extension__ using u128 = unsigned __int128;
    const auto wide = static_cast<u128>(engine_()) * n;
    return static_cast<std::size_t>(wide >> 64);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dqsim
