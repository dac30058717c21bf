#ifndef GROUNDRL_GRPO_HPP_
#define GROUNDRL_GRPO_HPP_

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace groundrl {

struct GroupSizeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class LengthNorm {
  kPerResponse,  // divide each response's token sum by its own length
  kMaxTokens,    // divide by a fixed constant instead
};

struct ObjectiveConfig {
  double clip_epsilon = 0.2;
  LengthNorm length_norm = LengthNorm::kPerResponse;
  int max_tokens = 64;  // the constant substituted for response length
  bool difficulty_weighting = false;
  double kl_coefficient = 0.0;
};

/// Group-normalized advantages. Degenerate groups (zero reward variance)
/// produce all-zero advantages instead of being dropped, so group counts
/// stay stable; callers can track the degenerate flag.
struct AdvantageSet {
  std::vector<double> advantages;
  bool degenerate = false;
};

struct DifficultyWeight {
  double w_q = 1.0;
};

/// A_i = (r_i - mean) / std over the group, population standard deviation.
inline AdvantageSet group_advantages(std::span<const double> rewards) {
  const std::size_t n = rewards.size();
  if (n < 2) {
    throw GroupSizeError("advantage group needs at least 2 rewards");
  }
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(n);
  const double sd = std::sqrt(var);

  AdvantageSet out;
  out.advantages.resize(n, 0.0);
  if (sd < 1e-12) {
    out.degenerate = true;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.advantages[i] = (rewards[i] - mean) / sd;
  }
  return out;
}

/// w_q = 0.5 + (1/lambda_q - min 1/lambda) / (max 1/lambda - min 1/lambda).
/// Smaller boxes (harder samples) get higher weights, bounded in [0.5, 1.5].
/// When every lambda is equal the min-max window collapses; all weights are
/// defined as the neutral midpoint 1.0.
inline std::vector<DifficultyWeight> difficulty_weights(
    std::span<const double> lambdas) {
  if (lambdas.empty()) {
    throw GroupSizeError("difficulty_weights needs at least one sample");
  }
  std::vector<double> inv(lambdas.size());
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0) || lambdas[i] > 1.0) {
      throw DomainError("relative box size must lie in (0, 1]");
    }
    inv[i] = 1.0 / lambdas[i];
  }
  double lo = inv[0], hi = inv[0];
  for (double v : inv) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<DifficultyWeight> out(lambdas.size());
  if (hi - lo < 1e-12) {
    for (auto& w : out) w.w_q = 1.0;
    return out;
  }
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    out[i].w_q = 0.5 + (inv[i] - lo) / (hi - lo);
  }
  return out;
}

}  // namespace groundrl

#endif  // GROUNDRL_GRPO_HPP_
