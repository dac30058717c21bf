#ifndef GROUNDRL_POLICY_ENV_HPP_
#define GROUNDRL_POLICY_ENV_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "groundrl/geometry.hpp"
#include "groundrl/grpo.hpp"
#include "groundrl/rewards.hpp"
#include "groundrl/rng.hpp"

namespace groundrl {

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Token encoding for the synthetic policy's responses: kThinkToken is the
// single content-free filler symbol, any value >= 0 is a coordinate bin.
constexpr int kThinkToken = -1;
constexpr int kCoordTokens = 4;

/// One grounding query: image, ground-truth box, and cached difficulty
/// quantities. The screenshot/instruction pair of the real task is
/// abstracted into the id.
struct GroundingSample {
  std::string id;
  ImageDims dims;
  Box gt;
  double lambda = 0.0;        // relative_box_size(gt, dims)
  DifficultyWeight w_q{1.0};  // filled by assign_difficulty_weights
};

/// Tabular softmax policy for one query: a Bernoulli continue-thinking
/// logit and four coordinate-bin logit vectors of length G.
struct SampleParams {
  double think_logit = 0.0;
  std::array<std::vector<double>, 4> coord_logits;

  static SampleParams zeros(int grid_bins) {
    SampleParams p;
    for (auto& v : p.coord_logits) v.assign(grid_bins, 0.0);
    return p;
  }
};

/// Full policy: per-sample-id parameters. std::map keeps iteration order
/// sorted by id, which gradient accumulation relies on for determinism.
struct PolicyParams {
  int grid_bins = 2;
  std::map<std::string, SampleParams> by_id;

  static PolicyParams zeros(std::span<const GroundingSample> dataset,
                            int grid_bins) {
    PolicyParams p;
    p.grid_bins = grid_bins;
    for (const auto& s : dataset) {
      p.by_id.emplace(s.id, SampleParams::zeros(grid_bins));
    }
    return p;
  }
};

/// One sampled response: k think tokens followed by 4 coordinate tokens,
/// with the per-token log-probabilities recorded under the sampling policy.
struct Response {
  std::vector<int> tokens;
  std::vector<double> old_logprobs;
  bool forced_stop = false;  // think budget exhausted, answer forced
  std::optional<Box> parsed;

  int length() const { return static_cast<int>(tokens.size()); }
  int think_count() const { return length() - kCoordTokens; }
};

/// One query's N responses with rewards and group-normalized advantages.
struct RolloutGroup {
  GroundingSample sample;
  std::vector<Response> responses;
  std::vector<RewardBreakdown> rewards;
  AdvantageSet advantages;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double log_sigmoid(double z) {
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

inline std::vector<double> softmax(std::span<const double> logits) {
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

inline double log_softmax_at(std::span<const double> logits, int idx) {
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - m);
  return logits[idx] - m - std::log(sum);
}

/// Bin b of G maps to pixel value b * extent / (G - 1), so bin 0 is the
/// image edge 0 and bin G-1 the opposite edge.
inline double bin_to_pixel(int bin, double extent, int grid_bins) {
  return static_cast<double>(bin) * extent / static_cast<double>(grid_bins - 1);
}

/// Decodes the trailing 4 coordinate tokens into a Box; format failure
/// (empty optional) when the corner ordering is invalid or the sequence is
/// malformed.
inline std::optional<Box> parse_answer(std::span<const int> tokens,
                                       int grid_bins, const ImageDims& dims) {
  if (tokens.size() < kCoordTokens) return std::nullopt;
  std::array<int, 4> bins{};
  for (int i = 0; i < kCoordTokens; ++i) {
    const int t = tokens[tokens.size() - kCoordTokens + i];
    if (t < 0 || t >= grid_bins) return std::nullopt;
    bins[i] = t;
  }
  const double x1 = bin_to_pixel(bins[0], dims.width, grid_bins);
  const double y1 = bin_to_pixel(bins[1], dims.height, grid_bins);
  const double x2 = bin_to_pixel(bins[2], dims.width, grid_bins);
  const double y2 = bin_to_pixel(bins[3], dims.height, grid_bins);
  if (x2 <= x1 || y2 <= y1) return std::nullopt;
  return Box(x1, y1, x2, y2);
}

/// Per-token log-probabilities of an existing token sequence under the
/// given parameters. The voluntary-stop term log(1 - sigmoid(think_logit))
/// is attached to the first coordinate token; a forced stop at the think
/// cap contributes no stop term. Used both for old_logprobs at sampling
/// time and for re-evaluating responses under updated parameters.
inline std::vector<double> response_logprobs(const SampleParams& p,
                                             const Response& r) {
  const int k = r.think_count();
  std::vector<double> lp(r.tokens.size());
  for (int t = 0; t < k; ++t) lp[t] = log_sigmoid(p.think_logit);
  for (int i = 0; i < kCoordTokens; ++i) {
    lp[k + i] = log_softmax_at(p.coord_logits[i], r.tokens[k + i]);
  }
  if (!r.forced_stop) lp[k] += log_sigmoid(-p.think_logit);
  return lp;
}

/// Samples one response: emit think tokens while a Bernoulli(sigmoid)
/// draw continues, up to a cap of max_tokens - 4, then 4 coordinate
/// tokens from the softmaxed bin logits.
inline Response sample_response(const PolicyParams& params,
                                const GroundingSample& sample, int max_tokens,
                                Rng& rng) {
  if (max_tokens < kCoordTokens + 1) {
    throw std::invalid_argument("max_tokens must be at least 5");
  }
  const SampleParams& p = params.by_id.at(sample.id);
  const int think_cap = max_tokens - kCoordTokens;
  const double p_think = sigmoid(p.think_logit);

  Response r;
  int k = 0;
  while (k < think_cap && rng.bernoulli(p_think)) {
    r.tokens.push_back(kThinkToken);
    ++k;
  }
  r.forced_stop = (k == think_cap);
  for (int i = 0; i < kCoordTokens; ++i) {
    const std::vector<double> probs = softmax(p.coord_logits[i]);
    r.tokens.push_back(rng.categorical(probs));
  }
  r.old_logprobs = response_logprobs(p, r);
  r.parsed = parse_answer(r.tokens, params.grid_bins, sample.dims);
  return r;
}

/// N rollouts for one query, scored and advantage-normalized.
inline RolloutGroup rollout_group(const PolicyParams& params,
                                  const GroundingSample& sample, int n,
                                  int max_tokens, const RewardWeights& weights,
                                  Rng& rng,
                                  RewardMode mode = RewardMode::kCombined) {
  if (n < 2) throw GroupSizeError("rollout group needs N >= 2");
  RolloutGroup g;
  g.sample = sample;
  g.responses.reserve(n);
  g.rewards.reserve(n);
  std::vector<double> totals(n);
  for (int i = 0; i < n; ++i) {
    g.responses.push_back(sample_response(params, sample, max_tokens, rng));
    g.rewards.push_back(reward_for_mode(mode, g.responses.back().parsed,
                                        sample.gt, sample.dims, weights));
    totals[i] = g.rewards.back().total;
  }
  g.advantages = group_advantages(totals);
  return g;
}

/// Synthetic dataset whose ground-truth boxes snap to the G-bin grid (so a
/// perfect policy exists) with relative sizes spread evenly across
/// [lambda lo, lambda hi].
inline std::vector<GroundingSample> generate_dataset(
    int num_samples, const ImageDims& dims, int grid_bins,
    std::pair<double, double> lambda_range, std::uint64_t seed) {
  const auto [lo, hi] = lambda_range;
  if (num_samples < 1) throw GenerationError("num_samples must be >= 1");
  if (!(lo > 0.0) || lo > hi || hi > 1.0) {
    throw GenerationError("lambda range must satisfy 0 < lo <= hi <= 1");
  }
  if (grid_bins < 2) throw GenerationError("grid_bins must be >= 2");

  // Feasible (width, height) bin spans whose lambda lands in range.
  const double sx = dims.width / (grid_bins - 1);
  const double sy = dims.height / (grid_bins - 1);
  struct Span2 {
    int dx, dy;
    double lambda;
  };
  std::vector<Span2> feasible;
  constexpr double kTol = 1e-9;
  for (int dx = 1; dx < grid_bins; ++dx) {
    for (int dy = 1; dy < grid_bins; ++dy) {
      const double lam = (dx * sx + dy * sy) / (dims.width + dims.height);
      if (lam >= lo - kTol && lam <= hi + kTol) {
        feasible.push_back({dx, dy, lam});
      }
    }
  }
  if (feasible.empty()) {
    throw GenerationError(
        "no grid-aligned box has a relative size in the requested range");
  }

  std::vector<GroundingSample> out;
  out.reserve(num_samples);
  int id_width = 1;
  for (int v = num_samples - 1; v >= 10; v /= 10) ++id_width;
  id_width = std::max(id_width, 4);
  for (int i = 0; i < num_samples; ++i) {
    const double target =
        num_samples == 1 ? (lo + hi) / 2.0
                         : lo + (hi - lo) * i / (num_samples - 1.0);
    const Span2* best = &feasible[0];
    for (const auto& f : feasible) {
      if (std::abs(f.lambda - target) < std::abs(best->lambda - target)) {
        best = &f;
      }
    }
    Rng rng(stream_seed(seed, static_cast<std::uint64_t>(i)));
    const int bx = rng.uniform_int(grid_bins - best->dx);
    const int by = rng.uniform_int(grid_bins - best->dy);
    Box gt(bin_to_pixel(bx, dims.width, grid_bins),
           bin_to_pixel(by, dims.height, grid_bins),
           bin_to_pixel(bx + best->dx, dims.width, grid_bins),
           bin_to_pixel(by + best->dy, dims.height, grid_bins));
    std::string id = "q" + std::string(id_width, '0');
    for (int v = i, pos = static_cast<int>(id.size()) - 1; v > 0; v /= 10) {
      id[pos--] = static_cast<char>('0' + v % 10);
    }
    GroundingSample s{id, dims, gt, relative_box_size(gt, dims)};
    out.push_back(std::move(s));
  }
  return out;
}

/// Fills each sample's cached difficulty weight from the dataset-level
/// min-max window of inverse relative sizes.
inline void assign_difficulty_weights(std::span<GroundingSample> dataset) {
  std::vector<double> lambdas(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) lambdas[i] = dataset[i].lambda;
  const auto weights = difficulty_weights(lambdas);
  for (std::size_t i = 0; i < dataset.size(); ++i) dataset[i].w_q = weights[i];
}

}  // namespace groundrl

#endif  // GROUNDRL_POLICY_ENV_HPP_
