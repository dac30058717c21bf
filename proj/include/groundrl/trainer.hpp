#ifndef GROUNDRL_TRAINER_HPP_
#define GROUNDRL_TRAINER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "groundrl/io.hpp"
#include "groundrl/objective.hpp"
#include "groundrl/policy_env.hpp"

namespace groundrl {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class OptimizerKind { kSgd, kAdam };
enum class FilterPredicate { kHit, kReward };
enum class DifficultyWindow { kDataset, kBatch };

struct TrainConfig {
  std::uint64_t seed = 0;
  int iterations = 100;
  int batch_size = 32;
  int rollouts_n = 8;
  int max_tokens = 64;
  int grid_bins = 16;
  RewardWeights weights;
  ObjectiveConfig objective;
  RewardMode reward_mode = RewardMode::kCombined;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  // Scale-appropriate default for the tabular policy; the fine-tuning rate
  // reported for the 3B model (1e-6) is far too small here.
  double learning_rate = 1e-2;
  int inner_epochs = 1;
  bool filter_extremes = false;
  int filter_probes = 8;
  FilterPredicate filter_predicate = FilterPredicate::kHit;
  DifficultyWindow difficulty_window = DifficultyWindow::kDataset;
  int threads = 0;  // 0 = auto (GROUND_RL_THREADS env, then hardware)
  std::string rollout_dump_path;  // final-iteration rollouts as predictions
};

struct MetricsRecord {
  int iteration = 0;
  double mean_accuracy = 0.0;
  double mean_iou = 0.0;
  double mean_pred_lambda = 0.0;
  double mean_gt_lambda = 0.0;
  double mean_len_correct = 0.0;
  double mean_len_incorrect = 0.0;
  double extreme_all_correct_ratio = 0.0;
  double extreme_all_incorrect_ratio = 0.0;
  double extreme_all_correct_easy = 0.0;
  double extreme_all_correct_hard = 0.0;
  double extreme_all_incorrect_easy = 0.0;
  double extreme_all_incorrect_hard = 0.0;
  double degenerate_group_ratio = 0.0;
  double objective_value = 0.0;
};

inline const char* kMetricsCsvHeader =
    "iteration,mean_accuracy,mean_iou,mean_pred_lambda,mean_gt_lambda,"
    "mean_len_correct,mean_len_incorrect,extreme_all_correct_ratio,"
    "extreme_all_incorrect_ratio,extreme_all_correct_easy,"
    "extreme_all_correct_hard,extreme_all_incorrect_easy,"
    "extreme_all_incorrect_hard,degenerate_group_ratio,objective_value";

inline std::string metrics_to_csv(std::span<const MetricsRecord> records) {
  std::string out = kMetricsCsvHeader;
  out += '\n';
  for (const auto& m : records) {
    out += std::to_string(m.iteration);
    for (double v :
         {m.mean_accuracy, m.mean_iou, m.mean_pred_lambda, m.mean_gt_lambda,
          m.mean_len_correct, m.mean_len_incorrect,
          m.extreme_all_correct_ratio, m.extreme_all_incorrect_ratio,
          m.extreme_all_correct_easy, m.extreme_all_correct_hard,
          m.extreme_all_incorrect_easy, m.extreme_all_incorrect_hard,
          m.degenerate_group_ratio, m.objective_value}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

inline std::string metrics_to_jsonl(std::span<const MetricsRecord> records) {
  std::string out;
  for (const auto& m : records) {
    json j;
    j["iteration"] = m.iteration;
    j["mean_accuracy"] = m.mean_accuracy;
    j["mean_iou"] = m.mean_iou;
    j["mean_pred_lambda"] = m.mean_pred_lambda;
    j["mean_gt_lambda"] = m.mean_gt_lambda;
    j["mean_len_correct"] = m.mean_len_correct;
    j["mean_len_incorrect"] = m.mean_len_incorrect;
    j["extreme_all_correct_ratio"] = m.extreme_all_correct_ratio;
    j["extreme_all_incorrect_ratio"] = m.extreme_all_incorrect_ratio;
    j["extreme_all_correct_easy"] = m.extreme_all_correct_easy;
    j["extreme_all_correct_hard"] = m.extreme_all_correct_hard;
    j["extreme_all_incorrect_easy"] = m.extreme_all_incorrect_easy;
    j["extreme_all_incorrect_hard"] = m.extreme_all_incorrect_hard;
    j["degenerate_group_ratio"] = m.degenerate_group_ratio;
    j["objective_value"] = m.objective_value;
    out += j.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct AdamSlot {
  SampleParams m;
  SampleParams v;
  int t = 0;
};

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::map<std::string, AdamSlot> adam;  // per sample id, lazily created
};

namespace detail {

template <typename F>
void for_each_param(SampleParams& p, SampleGrad& g, F f) {
  f(p.think_logit, g.think_logit);
  for (int j = 0; j < 4; ++j) {
    for (std::size_t b = 0; b < p.coord_logits[j].size(); ++b) {
      f(p.coord_logits[j][b], g.coord_logits[j][b]);
    }
  }
}

}  // namespace detail

/// Ascent step on the given per-sample gradients. Adam state is kept per
/// sample id with its own timestep, so samples outside the batch are
/// untouched.
inline void optimizer_step(PolicyParams& params,
                           std::map<std::string, SampleGrad>& grads,
                           OptimizerState& state) {
  for (auto& [id, grad] : grads) {
    bool finite = true;
    detail::for_each_param(grad, grad, [&](double& g, double&) {
      if (!std::isfinite(g)) finite = false;
    });
    if (!finite) {
      throw std::runtime_error("non-finite gradient for sample " + id);
    }
    SampleParams& p = params.by_id.at(id);
    if (state.kind == OptimizerKind::kSgd) {
      detail::for_each_param(p, grad, [&](double& theta, double& g) {
        theta += state.learning_rate * g;
      });
    } else {
      auto [it, inserted] = state.adam.try_emplace(id);
      AdamSlot& slot = it->second;
      if (inserted) {
        slot.m = SampleParams::zeros(params.grid_bins);
        slot.v = SampleParams::zeros(params.grid_bins);
      }
      slot.t += 1;
      const double bc1 = 1.0 - std::pow(state.beta1, slot.t);
      const double bc2 = 1.0 - std::pow(state.beta2, slot.t);
      auto step_one = [&](double& theta, double& g, double& m, double& v) {
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g * g;
        const double mh = m / bc1;
        const double vh = v / bc2;
        theta += state.learning_rate * mh / (std::sqrt(vh) + state.eps);
      };
      step_one(p.think_logit, grad.think_logit, slot.m.think_logit,
               slot.v.think_logit);
      for (int j = 0; j < 4; ++j) {
        for (std::size_t b = 0; b < p.coord_logits[j].size(); ++b) {
          step_one(p.coord_logits[j][b], grad.coord_logits[j][b],
                   slot.m.coord_logits[j][b], slot.v.coord_logits[j][b]);
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Parallel helper: deterministic regardless of thread count because each
// index writes its own slot and all reduction happens afterwards in order.
// ---------------------------------------------------------------------------

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("GROUND_RL_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

template <typename F>
void parallel_for(int n, int threads, F f) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += threads) f(i);
    });
  }
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainResult {
  std::vector<MetricsRecord> metrics;
  PolicyParams params;
  OptimizerState opt_state;
};

inline void validate_config(const TrainConfig& cfg, std::size_t dataset_size) {
  if (dataset_size == 0) throw ConfigError("dataset is empty");
  if (cfg.iterations < 1) throw ConfigError("iterations must be >= 1");
  if (cfg.batch_size < 1 ||
      static_cast<std::size_t>(cfg.batch_size) > dataset_size) {
    throw ConfigError("batch_size must be in [1, dataset size]");
  }
  if (cfg.rollouts_n < 2) throw ConfigError("rollouts_n must be >= 2");
  if (cfg.max_tokens < kCoordTokens + 1) {
    throw ConfigError("max_tokens must be >= 5");
  }
  if (cfg.grid_bins < 2) throw ConfigError("grid_bins must be >= 2");
  if (cfg.objective.max_tokens < cfg.max_tokens) {
    throw ConfigError(
        "objective.max_tokens must cover the longest generatable response");
  }
  if (cfg.inner_epochs < 1) throw ConfigError("inner_epochs must be >= 1");
  if (!(cfg.learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
}

namespace detail {

struct ResponseStats {
  double hit = 0.0;
  double iou = 0.0;
  std::optional<double> pred_lambda;
  int length = 0;
};

inline ResponseStats response_stats(const Response& r,
                                    const GroundingSample& s) {
  ResponseStats out;
  out.length = r.length();
  if (r.parsed) {
    out.hit = reward_hit(*r.parsed, s.gt);
    out.iou = iou(*r.parsed, s.gt);
    out.pred_lambda = relative_box_size(*r.parsed, s.dims);
  }
  return out;
}

}  // namespace detail

/// Metrics over one iteration's rollout groups. hard_threshold is the
/// dataset median lambda; groups strictly below it count as hard.
inline MetricsRecord compute_metrics(std::span<const RolloutGroup> groups,
                                     double hard_threshold, int iteration) {
  MetricsRecord m;
  m.iteration = iteration;
  double sum_hit = 0, sum_iou = 0, sum_pred_lambda = 0, sum_gt_lambda = 0;
  double sum_len_correct = 0, sum_len_incorrect = 0;
  int n_resp = 0, n_pred = 0, n_correct = 0, n_incorrect = 0;
  int all_correct = 0, all_incorrect = 0, degenerate = 0;
  int easy_groups = 0, hard_groups = 0;
  int all_correct_easy = 0, all_correct_hard = 0;
  int all_incorrect_easy = 0, all_incorrect_hard = 0;

  for (const auto& g : groups) {
    sum_gt_lambda += g.sample.lambda;
    bool any_hit = false, any_miss = false;
    for (const auto& r : g.responses) {
      const auto st = detail::response_stats(r, g.sample);
      ++n_resp;
      sum_hit += st.hit;
      sum_iou += st.iou;
      if (st.pred_lambda) {
        sum_pred_lambda += *st.pred_lambda;
        ++n_pred;
      }
      if (st.hit > 0.5) {
        any_hit = true;
        sum_len_correct += st.length;
        ++n_correct;
      } else {
        any_miss = true;
        sum_len_incorrect += st.length;
        ++n_incorrect;
      }
    }
    const bool hard = g.sample.lambda < hard_threshold;
    (hard ? hard_groups : easy_groups) += 1;
    if (!any_miss) {
      ++all_correct;
      (hard ? all_correct_hard : all_correct_easy) += 1;
    }
    if (!any_hit) {
      ++all_incorrect;
      (hard ? all_incorrect_hard : all_incorrect_easy) += 1;
    }
    if (g.advantages.degenerate) ++degenerate;
  }

  const double ng = static_cast<double>(groups.size());
  if (n_resp > 0) {
    m.mean_accuracy = sum_hit / n_resp;
    m.mean_iou = sum_iou / n_resp;
  }
  if (n_pred > 0) m.mean_pred_lambda = sum_pred_lambda / n_pred;
  if (!groups.empty()) m.mean_gt_lambda = sum_gt_lambda / ng;
  if (n_correct > 0) m.mean_len_correct = sum_len_correct / n_correct;
  if (n_incorrect > 0) m.mean_len_incorrect = sum_len_incorrect / n_incorrect;
  if (!groups.empty()) {
    m.extreme_all_correct_ratio = all_correct / ng;
    m.extreme_all_incorrect_ratio = all_incorrect / ng;
    m.degenerate_group_ratio = degenerate / ng;
  }
  if (easy_groups > 0) {
    m.extreme_all_correct_easy = static_cast<double>(all_correct_easy) / easy_groups;
    m.extreme_all_incorrect_easy =
        static_cast<double>(all_incorrect_easy) / easy_groups;
  }
  if (hard_groups > 0) {
    m.extreme_all_correct_hard = static_cast<double>(all_correct_hard) / hard_groups;
    m.extreme_all_incorrect_hard =
        static_cast<double>(all_incorrect_hard) / hard_groups;
  }
  return m;
}

inline double median_lambda(std::span<const GroundingSample> dataset) {
  std::vector<double> l(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) l[i] = dataset[i].lambda;
  std::sort(l.begin(), l.end());
  const std::size_t n = l.size();
  return n % 2 == 1 ? l[n / 2] : (l[n / 2 - 1] + l[n / 2]) / 2.0;
}

/// GRPO training loop. Deterministic given cfg.seed: rollouts use
/// counter-based rng streams keyed by (seed, sample index, iteration) and
/// gradients are accumulated in id order.
inline TrainResult train(std::span<const GroundingSample> dataset,
                         const TrainConfig& cfg,
                         const PolicyParams* initial = nullptr) {
  validate_config(cfg, dataset.size());
  const int threads = resolve_threads(cfg.threads);

  TrainResult result;
  result.params = initial ? *initial
                          : PolicyParams::zeros(dataset, cfg.grid_bins);
  if (result.params.grid_bins != cfg.grid_bins) {
    throw ConfigError("initial params grid_bins does not match config");
  }
  result.opt_state.kind = cfg.optimizer;
  result.opt_state.learning_rate = cfg.learning_rate;

  const double hard_threshold = median_lambda(dataset);

  // Seed-shuffled visit order, then round-robin batches.
  std::vector<int> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  {
    Rng shuffle_rng(stream_seed(cfg.seed, 0x5bffafd1ULL));
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);
    }
  }

  std::string rollout_dump;

  for (int it = 1; it <= cfg.iterations; ++it) {
    std::vector<int> batch(cfg.batch_size);
    for (int b = 0; b < cfg.batch_size; ++b) {
      batch[b] = order[(static_cast<std::size_t>(it - 1) * cfg.batch_size + b) %
                       dataset.size()];
    }

    std::vector<RolloutGroup> groups(batch.size());
    parallel_for(static_cast<int>(batch.size()), threads, [&](int b) {
      const GroundingSample& s = dataset[batch[b]];
      Rng rng(stream_seed(cfg.seed, static_cast<std::uint64_t>(batch[b]),
                          static_cast<std::uint64_t>(it)));
      groups[b] = rollout_group(result.params, s, cfg.rollouts_n,
                                cfg.max_tokens, cfg.weights, rng,
                                cfg.reward_mode);
    });

    // Per-group difficulty weights: dataset window uses the cached w_q,
    // batch window renormalizes over this batch only.
    std::vector<DifficultyWeight> wq(groups.size());
    if (cfg.difficulty_window == DifficultyWindow::kBatch) {
      std::vector<double> lambdas(groups.size());
      for (std::size_t b = 0; b < groups.size(); ++b) {
        lambdas[b] = groups[b].sample.lambda;
      }
      wq = difficulty_weights(lambdas);
    } else {
      for (std::size_t b = 0; b < groups.size(); ++b) {
        wq[b] = groups[b].sample.w_q;
      }
    }

    MetricsRecord m = compute_metrics(groups, hard_threshold, it);
    {
      double obj = 0.0;
      for (std::size_t b = 0; b < groups.size(); ++b) {
        obj += objective_at(result.params, groups[b], cfg.objective, wq[b]);
      }
      m.objective_value = obj / static_cast<double>(groups.size());
    }
    result.metrics.push_back(m);

    for (int epoch = 0; epoch < cfg.inner_epochs; ++epoch) {
      std::vector<SampleGrad> grads(groups.size(),
                                    SampleGrad::zeros(cfg.grid_bins));
      parallel_for(static_cast<int>(groups.size()), threads, [&](int b) {
        grads[b] = objective_gradient(result.params, groups[b], cfg.objective,
                                      wq[b]);
      });
      // std::map keys sorted by id: deterministic accumulation order.
      std::map<std::string, SampleGrad> grad_map;
      for (std::size_t b = 0; b < groups.size(); ++b) {
        grad_map.emplace(groups[b].sample.id, std::move(grads[b]));
      }
      optimizer_step(result.params, grad_map, result.opt_state);
    }

    if (!cfg.rollout_dump_path.empty() && it == cfg.iterations) {
      std::vector<PredictionRecord> preds;
      for (const auto& g : groups) {
        for (const auto& r : g.responses) {
          PredictionRecord pr;
          pr.id = g.sample.id;
          if (r.parsed) {
            pr.pred = r.parsed;
          } else {
            pr.format_failure = true;
          }
          pr.response_length = r.length();
          preds.push_back(std::move(pr));
        }
      }
      rollout_dump = predictions_to_jsonl(preds);
    }
  }

  if (!cfg.rollout_dump_path.empty()) {
    write_file_atomic(cfg.rollout_dump_path, rollout_dump);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Data-consistency filter: probe each sample k times under the given
// policy and discard those answered consistently (all correct or all
// incorrect), which would only ever yield zero-variance rollout groups.
// ---------------------------------------------------------------------------

struct FilterResult {
  std::vector<GroundingSample> kept;
  int dropped_all_correct = 0;
  int dropped_all_incorrect = 0;
};

inline FilterResult filter_dataset(const PolicyParams& params,
                                   std::span<const GroundingSample> dataset,
                                   int k_probes, std::uint64_t seed,
                                   int max_tokens,
                                   const RewardWeights& weights,
                                   FilterPredicate predicate =
                                       FilterPredicate::kHit) {
  if (k_probes < 2) throw ConfigError("k_probes must be >= 2");
  FilterResult out;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const GroundingSample& s = dataset[i];
    Rng rng(stream_seed(seed, static_cast<std::uint64_t>(i), 0xf117e2ULL));
    int correct = 0;
    for (int k = 0; k < k_probes; ++k) {
      const Response r = sample_response(params, s, max_tokens, rng);
      bool ok = false;
      if (r.parsed) {
        if (predicate == FilterPredicate::kHit) {
          ok = reward_hit(*r.parsed, s.gt) > 0.5;
        } else {
          ok = reward_combined(r.parsed, s.gt, s.dims, weights).total > 0.0;
        }
      }
      if (ok) ++correct;
    }
    if (correct == k_probes) {
      ++out.dropped_all_correct;
    } else if (correct == 0) {
      ++out.dropped_all_incorrect;
    } else {
      out.kept.push_back(s);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpointing: policy params plus optimizer state, versioned JSON.
// Doubles are emitted in shortest round-trip form, so save/load is
// bit-exact.
// ---------------------------------------------------------------------------

inline json sample_params_to_json(const SampleParams& p) {
  json j;
  j["think_logit"] = p.think_logit;
  j["coord_logits"] = {p.coord_logits[0], p.coord_logits[1], p.coord_logits[2],
                       p.coord_logits[3]};
  return j;
}

inline SampleParams sample_params_from_json(const json& j) {
  SampleParams p;
  p.think_logit = j.at("think_logit").get<double>();
  for (int i = 0; i < 4; ++i) {
    p.coord_logits[i] = j.at("coord_logits").at(i).get<std::vector<double>>();
  }
  return p;
}

inline void save_checkpoint(const std::filesystem::path& path,
                            const PolicyParams& params,
                            const OptimizerState& state) {
  json j;
  j["version"] = 1;
  j["grid_bins"] = params.grid_bins;
  json jp = json::object();
  for (const auto& [id, p] : params.by_id) jp[id] = sample_params_to_json(p);
  j["params"] = std::move(jp);
  json js;
  js["kind"] = state.kind == OptimizerKind::kAdam ? "adam" : "sgd";
  js["learning_rate"] = state.learning_rate;
  js["beta1"] = state.beta1;
  js["beta2"] = state.beta2;
  js["eps"] = state.eps;
  json slots = json::object();
  for (const auto& [id, slot] : state.adam) {
    json s;
    s["t"] = slot.t;
    s["m"] = sample_params_to_json(slot.m);
    s["v"] = sample_params_to_json(slot.v);
    slots[id] = std::move(s);
  }
  js["adam"] = std::move(slots);
  j["optimizer"] = std::move(js);
  write_file_atomic(path, j.dump());
}

inline std::pair<PolicyParams, OptimizerState> load_checkpoint(
    const std::filesystem::path& path) {
  const json j = json::parse(read_file(path));
  if (j.at("version").get<int>() != 1) {
    throw IoError("unsupported checkpoint version");
  }
  PolicyParams params;
  params.grid_bins = j.at("grid_bins").get<int>();
  for (const auto& [id, jp] : j.at("params").items()) {
    params.by_id.emplace(id, sample_params_from_json(jp));
  }
  OptimizerState state;
  const json& js = j.at("optimizer");
  state.kind = js.at("kind").get<std::string>() == "adam" ? OptimizerKind::kAdam
                                                          : OptimizerKind::kSgd;
  state.learning_rate = js.at("learning_rate").get<double>();
  state.beta1 = js.at("beta1").get<double>();
  state.beta2 = js.at("beta2").get<double>();
  state.eps = js.at("eps").get<double>();
  for (const auto& [id, s] : js.at("adam").items()) {
    AdamSlot slot;
    slot.t = s.at("t").get<int>();
    slot.m = sample_params_from_json(s.at("m"));
    slot.v = sample_params_from_json(s.at("v"));
    state.adam.emplace(id, std::move(slot));
  }
  return {std::move(params), std::move(state)};
}

}  // namespace groundrl

#endif  // GROUNDRL_TRAINER_HPP_
