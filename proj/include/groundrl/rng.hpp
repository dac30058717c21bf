#ifndef GROUNDRL_RNG_HPP_
#define GROUNDRL_RNG_HPP_

#include <cstdint>
#include <random>
#include <span>

namespace groundrl {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from (run seed, sample index,
/// iteration). Rollouts for different samples can then run in any order,
/// or in parallel, with bit-identical results.
inline std::uint64_t stream_seed(std::uint64_t run_seed, std::uint64_t a,
                                 std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(run_seed) ^ a) ^ b);
}

/// Deterministic RNG wrapper. Doubles are produced from raw engine output
/// rather than std distributions, whose results vary across standard
/// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  /// Index sampled proportionally to probs (assumed to sum to 1).
  int categorical(std::span<const double> probs) {
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

  /// Uniform integer in [0, n).
  int uniform_int(int n) { return static_cast<int>(gen_() % static_cast<std::uint64_t>(n)); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace groundrl

#endif  // GROUNDRL_RNG_HPP_
