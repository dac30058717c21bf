// Command-line front end: dataset generation, GRPO training runs and the
// ablation presets, offline scoring, and metric-log comparison.

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "groundrl/config.hpp"
#include "groundrl/eval.hpp"
#include "groundrl/io.hpp"
#include "groundrl/policy_env.hpp"
#include "groundrl/trainer.hpp"

namespace fs = std::filesystem;
using namespace groundrl;

namespace {

bool g_quiet = false;

void info(const std::string& msg) {
  if (!g_quiet) std::cerr << msg << "\n";
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const fs::path& path) {
  CsvTable t;
  std::istringstream in(read_file(path));
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

int run_gen_data(int num, double width, double height, int grid_bins,
                 double lambda_min, double lambda_max, std::uint64_t seed,
                 const std::string& out) {
  auto dataset = generate_dataset(num, ImageDims(width, height), grid_bins,
                                  {lambda_min, lambda_max}, seed);
  save_dataset(out, dataset);
  info("wrote " + std::to_string(dataset.size()) + " samples to " + out);
  return 0;
}

int run_score(const std::string& gt, const std::string& pred, double alpha,
              double beta, const std::string& out_dir) {
  RewardWeights w{alpha, beta};
  const EvalReport report = score_prediction_files(gt, pred, w);
  const fs::path dir(out_dir);
  write_file_atomic(dir / "report.csv", eval_report_csv(report));
  write_file_atomic(dir / "report.json", eval_report_json(report));
  for (const auto& e : report.errors) std::cerr << "error: " << e << "\n";
  info("scored " + std::to_string(report.rows.size()) + " rows; accuracy " +
       format_double(report.aggregates.accuracy));
  return report.ok() ? 0 : 1;
}

int run_compare(const std::string& a_path, const std::string& b_path,
                const std::string& out) {
  const CsvTable a = read_csv(a_path);
  const CsvTable b = read_csv(b_path);
  if (a.header != b.header) {
    std::cerr << "error: metric logs have different columns\n";
    return 1;
  }
  const std::size_t n = std::min(a.rows.size(), b.rows.size());
  if (a.rows.size() != b.rows.size()) {
    std::cerr << "warning: logs have different lengths; truncating to "
              << n << " rows\n";
  }
  std::string csv = "iteration";
  for (std::size_t c = 1; c < a.header.size(); ++c) {
    csv += ",a_" + a.header[c] + ",b_" + a.header[c] + ",delta_" + a.header[c];
  }
  csv += '\n';
  for (std::size_t r = 0; r < n; ++r) {
    if (a.rows[r].at(0) != b.rows[r].at(0)) {
      std::cerr << "error: iteration mismatch at row " << r << "\n";
      return 1;
    }
    csv += a.rows[r][0];
    for (std::size_t c = 1; c < a.header.size(); ++c) {
      const double av = std::stod(a.rows[r].at(c));
      const double bv = std::stod(b.rows[r].at(c));
      csv += ',' + format_double(av) + ',' + format_double(bv) + ',' +
             format_double(bv - av);
    }
    csv += '\n';
  }
  write_file_atomic(out, csv);
  info("wrote comparison of " + std::to_string(n) + " iterations to " + out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale GRPO grounding laboratory"};
  app.require_subcommand(1);
  app.add_flag("--quiet", g_quiet, "suppress informational output");

  // gen-data ----------------------------------------------------------------
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  int gen_num = 64;
  double gen_w = 1000, gen_h = 1000;
  int gen_bins = 16;
  double gen_lmin = 0.05, gen_lmax = 0.6;
  std::uint64_t gen_seed = 0;
  std::string gen_out = "dataset.jsonl";
  gen->add_option("--num", gen_num, "number of samples")->check(CLI::PositiveNumber);
  gen->add_option("--width", gen_w, "image width in pixels");
  gen->add_option("--height", gen_h, "image height in pixels");
  gen->add_option("--grid-bins", gen_bins, "coordinate grid bins");
  gen->add_option("--lambda-min", gen_lmin, "minimum relative box size");
  gen->add_option("--lambda-max", gen_lmax, "maximum relative box size");
  gen->add_option("--seed", gen_seed, "rng seed");
  gen->add_option("--out", gen_out, "output JSON-lines path");

  // train -------------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "run GRPO training");
  std::string tr_data, tr_config, tr_preset;
  std::string tr_metrics = "metrics.csv";
  std::string tr_checkpoint, tr_dump;
  std::vector<std::string> tr_set;
  std::uint64_t tr_seed = 0;
  bool tr_seed_set = false;
  tr->add_option("--data", tr_data, "dataset JSON-lines path")->required();
  tr->add_option("--config", tr_config, "key = value config file");
  tr->add_option("--preset", tr_preset,
                 "experiment preset (hit-only, iou-only, hit+iou, combined, "
                 "std-grpo, max-tokens-norm, difficulty-weighted)");
  tr->add_option("--set", tr_set,
                 "config override as key=value (repeatable; applied after "
                 "--config and --preset)");
  tr->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t v) { tr_seed = v; tr_seed_set = true; },
        "rng seed (overrides config file)");
  tr->add_option("--metrics-out", tr_metrics,
                 "metrics CSV path (a .jsonl mirror is written alongside)");
  tr->add_option("--checkpoint-out", tr_checkpoint, "checkpoint JSON path");
  tr->add_option("--dump-rollouts", tr_dump,
                 "write final-iteration rollouts as a predictions file");

  // score -------------------------------------------------------------------
  auto* sc = app.add_subcommand("score", "score predictions against gt");
  std::string sc_gt, sc_pred, sc_out = ".";
  double sc_alpha = 0.25, sc_beta = 0.125;
  sc->add_option("--gt", sc_gt, "ground-truth JSON-lines path")
      ->required()
      ->check(CLI::ExistingFile);
  sc->add_option("--pred", sc_pred, "predictions JSON-lines path")
      ->required()
      ->check(CLI::ExistingFile);
  sc->add_option("--alpha", sc_alpha, "IoU reward weight");
  sc->add_option("--beta", sc_beta, "box-size reward weight");
  sc->add_option("--out", sc_out, "output directory for report.csv/json");

  // compare -----------------------------------------------------------------
  auto* cp = app.add_subcommand("compare", "compare two metric logs");
  std::string cp_a, cp_b, cp_out = "compare.csv";
  cp->add_option("--a", cp_a, "first metrics CSV")->required()->check(CLI::ExistingFile);
  cp->add_option("--b", cp_b, "second metrics CSV")->required()->check(CLI::ExistingFile);
  cp->add_option("--out", cp_out, "output CSV path");

  // filter-data -------------------------------------------------------------
  auto* fd = app.add_subcommand(
      "filter-data", "drop samples answered consistently by a policy");
  std::string fd_data, fd_checkpoint, fd_out = "filtered.jsonl";
  int fd_probes = 8, fd_bins = 16, fd_max_tokens = 64;
  std::uint64_t fd_seed = 0;
  std::string fd_predicate = "hit";
  fd->add_option("--data", fd_data, "dataset JSON-lines path")
      ->required()
      ->check(CLI::ExistingFile);
  fd->add_option("--checkpoint", fd_checkpoint,
                 "policy checkpoint (default: fresh zero-logit policy)");
  fd->add_option("--probes", fd_probes, "responses sampled per sample");
  fd->add_option("--grid-bins", fd_bins, "grid bins for the fresh policy");
  fd->add_option("--max-tokens", fd_max_tokens, "response token cap");
  fd->add_option("--seed", fd_seed, "rng seed");
  fd->add_option("--predicate", fd_predicate, "correctness predicate: hit or reward");
  fd->add_option("--out", fd_out, "output JSON-lines path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return run_gen_data(gen_num, gen_w, gen_h, gen_bins, gen_lmin, gen_lmax,
                          gen_seed, gen_out);
    }

    if (tr->parsed()) {
      TrainConfig cfg;
      if (!tr_config.empty()) apply_config_file(cfg, tr_config);
      if (!tr_preset.empty()) {
        const ExperimentPreset& preset = find_preset(tr_preset);
        apply_preset(cfg, preset);
      }
      for (const auto& kv : tr_set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
          throw ConfigError("--set expects key=value, got: " + kv);
        }
        const std::string key = kv.substr(0, eq);
        if (!tr_preset.empty() &&
            (key == "reward_mode" || key == "length_norm" ||
             key == "difficulty_weighting")) {
          std::cerr << "warning: --set " << key << " overrides preset '"
                    << tr_preset << "'\n";
        }
        apply_config_kv(cfg, key, kv.substr(eq + 1));
      }
      if (tr_seed_set) cfg.seed = tr_seed;
      cfg.rollout_dump_path = tr_dump;

      std::vector<GroundingSample> dataset = load_dataset(tr_data);
      if (cfg.filter_extremes) {
        const PolicyParams init = PolicyParams::zeros(dataset, cfg.grid_bins);
        FilterResult fr = filter_dataset(init, dataset, cfg.filter_probes,
                                         cfg.seed, cfg.max_tokens, cfg.weights,
                                         cfg.filter_predicate);
        info("filter: kept " + std::to_string(fr.kept.size()) + ", dropped " +
             std::to_string(fr.dropped_all_correct) + " all-correct, " +
             std::to_string(fr.dropped_all_incorrect) + " all-incorrect");
        dataset = std::move(fr.kept);
        if (dataset.empty()) {
          std::cerr << "error: filter removed every sample\n";
          return 1;
        }
        assign_difficulty_weights(dataset);
        cfg.batch_size = std::min(cfg.batch_size,
                                  static_cast<int>(dataset.size()));
      }

      const TrainResult result = train(dataset, cfg);
      write_file_atomic(tr_metrics, metrics_to_csv(result.metrics));
      write_file_atomic(fs::path(tr_metrics).replace_extension(".jsonl"),
                        metrics_to_jsonl(result.metrics));
      if (!tr_checkpoint.empty()) {
        save_checkpoint(tr_checkpoint, result.params, result.opt_state);
      }
      const MetricsRecord& last = result.metrics.back();
      info("finished " + std::to_string(cfg.iterations) +
           " iterations; final accuracy " + format_double(last.mean_accuracy));
      return 0;
    }

    if (sc->parsed()) {
      return run_score(sc_gt, sc_pred, sc_alpha, sc_beta, sc_out);
    }

    if (cp->parsed()) {
      return run_compare(cp_a, cp_b, cp_out);
    }

    if (fd->parsed()) {
      std::vector<GroundingSample> dataset = load_dataset(fd_data);
      PolicyParams params;
      if (!fd_checkpoint.empty()) {
        params = load_checkpoint(fd_checkpoint).first;
      } else {
        params = PolicyParams::zeros(dataset, fd_bins);
      }
      const FilterPredicate pred = fd_predicate == "reward"
                                       ? FilterPredicate::kReward
                                       : FilterPredicate::kHit;
      if (fd_predicate != "hit" && fd_predicate != "reward") {
        throw ConfigError("invalid predicate: " + fd_predicate);
      }
      const FilterResult fr = filter_dataset(params, dataset, fd_probes,
                                             fd_seed, fd_max_tokens,
                                             RewardWeights{}, pred);
      save_dataset(fd_out, fr.kept);
      info("kept " + std::to_string(fr.kept.size()) + " of " +
           std::to_string(dataset.size()) + " samples (" +
           std::to_string(fr.dropped_all_correct) + " all-correct, " +
           std::to_string(fr.dropped_all_incorrect) + " all-incorrect dropped)");
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
