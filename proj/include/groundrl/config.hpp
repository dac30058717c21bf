#ifndef GROUNDRL_CONFIG_HPP_
#define GROUNDRL_CONFIG_HPP_

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "groundrl/trainer.hpp"

namespace groundrl {

// ---------------------------------------------------------------------------
// Flat key = value config files. Every TrainConfig field is addressable;
// CLI flags override file values.
// ---------------------------------------------------------------------------

inline std::map<std::string, std::string> parse_config_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string stripped = strip(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": expected key = value");
    }
    out[strip(stripped.substr(0, eq))] = strip(stripped.substr(eq + 1));
  }
  return out;
}

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("invalid boolean: " + v);
}

inline void apply_config_kv(TrainConfig& cfg, const std::string& key,
                            const std::string& value) {
  try {
    if (key == "seed") {
      cfg.seed = std::stoull(value);
    } else if (key == "iterations") {
      cfg.iterations = std::stoi(value);
    } else if (key == "batch_size") {
      cfg.batch_size = std::stoi(value);
    } else if (key == "rollouts_n") {
      cfg.rollouts_n = std::stoi(value);
    } else if (key == "max_tokens") {
      cfg.max_tokens = std::stoi(value);
      cfg.objective.max_tokens = std::max(cfg.objective.max_tokens,
                                          cfg.max_tokens);
    } else if (key == "grid_bins") {
      cfg.grid_bins = std::stoi(value);
    } else if (key == "alpha") {
      cfg.weights.alpha = std::stod(value);
    } else if (key == "beta") {
      cfg.weights.beta = std::stod(value);
    } else if (key == "clip_epsilon") {
      cfg.objective.clip_epsilon = std::stod(value);
    } else if (key == "length_norm") {
      if (value == "per_response") {
        cfg.objective.length_norm = LengthNorm::kPerResponse;
      } else if (value == "max_tokens") {
        cfg.objective.length_norm = LengthNorm::kMaxTokens;
      } else {
        throw ConfigError("invalid length_norm: " + value);
      }
    } else if (key == "norm_max_tokens") {
      cfg.objective.max_tokens = std::stoi(value);
    } else if (key == "difficulty_weighting") {
      cfg.objective.difficulty_weighting = parse_bool(value);
    } else if (key == "kl_coefficient") {
      cfg.objective.kl_coefficient = std::stod(value);
    } else if (key == "reward_mode") {
      if (value == "hit_only") {
        cfg.reward_mode = RewardMode::kHitOnly;
      } else if (value == "iou_only") {
        cfg.reward_mode = RewardMode::kIoUOnly;
      } else if (value == "hit_plus_iou") {
        cfg.reward_mode = RewardMode::kHitPlusIoU;
      } else if (value == "combined") {
        cfg.reward_mode = RewardMode::kCombined;
      } else {
        throw ConfigError("invalid reward_mode: " + value);
      }
    } else if (key == "optimizer") {
      if (value == "sgd") {
        cfg.optimizer = OptimizerKind::kSgd;
      } else if (value == "adam") {
        cfg.optimizer = OptimizerKind::kAdam;
      } else {
        throw ConfigError("invalid optimizer: " + value);
      }
    } else if (key == "learning_rate") {
      cfg.learning_rate = std::stod(value);
    } else if (key == "inner_epochs") {
      cfg.inner_epochs = std::stoi(value);
    } else if (key == "filter_extremes") {
      cfg.filter_extremes = parse_bool(value);
    } else if (key == "filter_probes") {
      cfg.filter_probes = std::stoi(value);
    } else if (key == "filter_predicate") {
      if (value == "hit") {
        cfg.filter_predicate = FilterPredicate::kHit;
      } else if (value == "reward") {
        cfg.filter_predicate = FilterPredicate::kReward;
      } else {
        throw ConfigError("invalid filter_predicate: " + value);
      }
    } else if (key == "difficulty_window") {
      if (value == "dataset") {
        cfg.difficulty_window = DifficultyWindow::kDataset;
      } else if (value == "batch") {
        cfg.difficulty_window = DifficultyWindow::kBatch;
      } else {
        throw ConfigError("invalid difficulty_window: " + value);
      }
    } else if (key == "threads") {
      cfg.threads = std::stoi(value);
    } else if (key == "rollout_dump_path") {
      cfg.rollout_dump_path = value;
    } else {
      throw ConfigError("unknown config key: " + key);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument&) {
    throw ConfigError("invalid value for " + key + ": " + value);
  } catch (const std::out_of_range&) {
    throw ConfigError("value out of range for " + key + ": " + value);
  }
}

inline void apply_config_file(TrainConfig& cfg,
                              const std::filesystem::path& path) {
  for (const auto& [k, v] : parse_config_file(path)) apply_config_kv(cfg, k, v);
}

// ---------------------------------------------------------------------------
// Experiment presets. Each preset changes exactly the factors of one
// ablation: the reward matrix (hit-only, iou-only, hit+iou, combined) and
// the objective-variant matrix (std-grpo, max-tokens-norm,
// difficulty-weighted).
// ---------------------------------------------------------------------------

struct ExperimentPreset {
  std::string name;
  RewardMode reward_mode = RewardMode::kCombined;
  bool sets_reward_mode = false;
  LengthNorm length_norm = LengthNorm::kPerResponse;
  bool difficulty_weighting = false;
  bool sets_objective = false;
};

inline const std::vector<ExperimentPreset>& experiment_presets() {
  static const std::vector<ExperimentPreset> presets = {
      {"hit-only", RewardMode::kHitOnly, true, LengthNorm::kPerResponse, false,
       false},
      {"iou-only", RewardMode::kIoUOnly, true, LengthNorm::kPerResponse, false,
       false},
      {"hit+iou", RewardMode::kHitPlusIoU, true, LengthNorm::kPerResponse,
       false, false},
      {"combined", RewardMode::kCombined, true, LengthNorm::kPerResponse, false,
       false},
      {"std-grpo", RewardMode::kCombined, false, LengthNorm::kPerResponse,
       false, true},
      {"max-tokens-norm", RewardMode::kCombined, false, LengthNorm::kMaxTokens,
       false, true},
      {"difficulty-weighted", RewardMode::kCombined, false,
       LengthNorm::kMaxTokens, true, true},
  };
  return presets;
}

inline const ExperimentPreset& find_preset(const std::string& name) {
  for (const auto& p : experiment_presets()) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown preset: " + name);
}

inline void apply_preset(TrainConfig& cfg, const ExperimentPreset& preset) {
  if (preset.sets_reward_mode) cfg.reward_mode = preset.reward_mode;
  if (preset.sets_objective) {
    cfg.objective.length_norm = preset.length_norm;
    cfg.objective.difficulty_weighting = preset.difficulty_weighting;
  }
}

}  // namespace groundrl

#endif  // GROUNDRL_CONFIG_HPP_
