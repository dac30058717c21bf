#ifndef GROUNDRL_OBJECTIVE_HPP_
#define GROUNDRL_OBJECTIVE_HPP_

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "groundrl/grpo.hpp"
#include "groundrl/policy_env.hpp"

namespace groundrl {

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Gradients share the parameter layout.
using SampleGrad = SampleParams;

/// Clipped token-level surrogate over one rollout group:
///   w_eff * (1/N) sum_i (1/L_i) sum_t min(ratio*A, clip(ratio)*A)
/// where the outcome advantage A_i is broadcast to every token of response
/// i, and L_i is the response length (PerResponse) or the fixed max_tokens
/// constant (MaxTokens). With kl_coefficient > 0 a per-token KL estimate
/// against the sampling policy, exp(u) - u - 1 with u = old - new, is
/// subtracted.
inline double surrogate_objective(
    const RolloutGroup& group,
    const std::vector<std::vector<double>>& new_logprobs,
    const ObjectiveConfig& cfg, DifficultyWeight w_q) {
  const std::size_t n = group.responses.size();
  if (new_logprobs.size() != n) {
    throw ShapeError("new_logprobs count does not match group size");
  }
  const double w_eff = cfg.difficulty_weighting ? w_q.w_q : 1.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Response& r = group.responses[i];
    if (new_logprobs[i].size() != r.old_logprobs.size()) {
      throw ShapeError("token count mismatch between old and new log-probs");
    }
    const double adv = group.advantages.advantages[i];
    const double len = cfg.length_norm == LengthNorm::kPerResponse
                           ? static_cast<double>(r.length())
                           : static_cast<double>(cfg.max_tokens);
    double s = 0.0;
    for (std::size_t t = 0; t < new_logprobs[i].size(); ++t) {
      const double ratio = std::exp(new_logprobs[i][t] - r.old_logprobs[t]);
      const double unclipped = ratio * adv;
      const double clipped =
          std::clamp(ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon) *
          adv;
      s += std::min(unclipped, clipped);
      if (cfg.kl_coefficient > 0.0) {
        const double u = r.old_logprobs[t] - new_logprobs[i][t];
        s -= cfg.kl_coefficient * (std::exp(u) - u - 1.0);
      }
    }
    total += s / len;
  }
  return w_eff * total / static_cast<double>(n);
}

/// Convenience: surrogate evaluated at the given current parameters.
inline double objective_at(const PolicyParams& params,
                           const RolloutGroup& group,
                           const ObjectiveConfig& cfg, DifficultyWeight w_q) {
  const SampleParams& p = params.by_id.at(group.sample.id);
  std::vector<std::vector<double>> new_lp;
  new_lp.reserve(group.responses.size());
  for (const Response& r : group.responses) {
    new_lp.push_back(response_logprobs(p, r));
  }
  return surrogate_objective(group, new_lp, cfg, w_q);
}

/// Exact gradient of surrogate_objective with respect to the group's
/// sample parameters. The clip is treated with the standard PPO
/// subgradient: tokens whose min selects the clipped branch contribute
/// zero.
inline SampleGrad objective_gradient(const PolicyParams& params,
                                     const RolloutGroup& group,
                                     const ObjectiveConfig& cfg,
                                     DifficultyWeight w_q) {
  const SampleParams& p = params.by_id.at(group.sample.id);
  const std::size_t n = group.responses.size();
  const double w_eff = cfg.difficulty_weighting ? w_q.w_q : 1.0;

  SampleGrad grad = SampleGrad::zeros(params.grid_bins);
  const double sig = sigmoid(p.think_logit);
  std::array<std::vector<double>, 4> probs;
  for (int j = 0; j < 4; ++j) probs[j] = softmax(p.coord_logits[j]);

  for (std::size_t i = 0; i < n; ++i) {
    const Response& r = group.responses[i];
    const std::vector<double> new_lp = response_logprobs(p, r);
    const double adv = group.advantages.advantages[i];
    const double len = cfg.length_norm == LengthNorm::kPerResponse
                           ? static_cast<double>(r.length())
                           : static_cast<double>(cfg.max_tokens);
    const double scale = w_eff / (static_cast<double>(n) * len);
    const int k = r.think_count();
    for (int t = 0; t < r.length(); ++t) {
      const double ratio = std::exp(new_lp[t] - r.old_logprobs[t]);
      const double unclipped = ratio * adv;
      const double clipped =
          std::clamp(ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon) *
          adv;
      // dJ_t/d(new_lp_t): ratio*adv through the unclipped branch, plus the
      // KL term's kl*(exp(u) - 1).
      double c = unclipped <= clipped ? unclipped : 0.0;
      if (cfg.kl_coefficient > 0.0) {
        const double u = r.old_logprobs[t] - new_lp[t];
        c += cfg.kl_coefficient * (std::exp(u) - 1.0);
      }
      c *= scale;
      if (c == 0.0) continue;
      if (r.tokens[t] == kThinkToken) {
        grad.think_logit += c * (1.0 - sig);
      } else {
        const int j = t - k;
        const int bin = r.tokens[t];
        grad.coord_logits[j][bin] += c;
        for (int b = 0; b < params.grid_bins; ++b) {
          grad.coord_logits[j][b] -= c * probs[j][b];
        }
        if (j == 0 && !r.forced_stop) grad.think_logit -= c * sig;
      }
    }
  }
  return grad;
}

/// Central-difference gradient of the surrogate, the verification oracle
/// for objective_gradient.
inline SampleGrad finite_diff_gradient(const PolicyParams& params,
                                       const RolloutGroup& group,
                                       const ObjectiveConfig& cfg,
                                       DifficultyWeight w_q, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
  PolicyParams work = params;
  SampleParams& p = work.by_id.at(group.sample.id);
  SampleGrad grad = SampleGrad::zeros(params.grid_bins);

  const auto central = [&](double& theta) {
    const double orig = theta;
    theta = orig + step;
    const double plus = objective_at(work, group, cfg, w_q);
    theta = orig - step;
    const double minus = objective_at(work, group, cfg, w_q);
    theta = orig;
    return (plus - minus) / (2.0 * step);
  };

  grad.think_logit = central(p.think_logit);
  for (int j = 0; j < 4; ++j) {
    for (int b = 0; b < params.grid_bins; ++b) {
      grad.coord_logits[j][b] = central(p.coord_logits[j][b]);
    }
  }
  return grad;
}

}  // namespace groundrl

#endif  // GROUNDRL_OBJECTIVE_HPP_
