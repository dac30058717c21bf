#ifndef GROUNDRL_EVAL_HPP_
#define GROUNDRL_EVAL_HPP_

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "groundrl/io.hpp"
#include "groundrl/rewards.hpp"

namespace groundrl {

/// One scored prediction row. Point-only predictions earn a hit score but
/// have no IoU / box-size components; format failures score zero
/// everywhere.
struct EvalRow {
  std::string id;
  std::string tag;
  double r_hit = 0.0;
  std::optional<double> r_iou;
  std::optional<double> r_box;
  std::optional<double> total;
  std::optional<double> lambda_pred;
  double lambda_gt = 0.0;
  bool format_failure = false;
  bool point_only = false;
  std::optional<int> response_length;
};

struct EvalAggregates {
  int num_rows = 0;
  double accuracy = 0.0;          // mean r_hit; failures count as misses
  double mean_iou = 0.0;          // failures in the denominator as 0;
                                  // point-only rows excluded entirely
  double mean_total = 0.0;
  double mean_lambda_pred = 0.0;  // over parsed boxes only
  double mean_lambda_gt = 0.0;    // one term per distinct id
  double format_failure_rate = 0.0;
};

struct GroupStats {
  int group_size = 0;
  double extreme_all_correct_ratio = 0.0;
  double extreme_all_incorrect_ratio = 0.0;
  double mean_len_correct = 0.0;
  double mean_len_incorrect = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  EvalAggregates aggregates;
  std::map<std::string, EvalAggregates> by_tag;  // present when gt has tags
  std::optional<GroupStats> group_stats;  // when ids carry multiple rows
  std::vector<std::string> errors;

  bool ok() const { return errors.empty(); }
};

inline EvalRow score_row(const PredictionRecord& pred, const GtRecord& gt,
                         const RewardWeights& weights) {
  EvalRow row;
  row.id = pred.id;
  row.tag = gt.tag;
  row.lambda_gt = gt.sample.lambda;
  row.response_length = pred.response_length;
  if (pred.pred) {
    const RewardBreakdown b =
        reward_combined(pred.pred, gt.sample.gt, gt.sample.dims, weights);
    row.r_hit = b.r_hit;
    row.r_iou = b.r_iou;
    row.r_box = b.r_box;
    row.total = b.total;
    row.lambda_pred = relative_box_size(*pred.pred, gt.sample.dims);
  } else if (pred.pred_point) {
    const Point& c = *pred.pred_point;
    const Box& g = gt.sample.gt;
    row.point_only = true;
    row.r_hit = (c.x >= g.x1 && c.x <= g.x2 && c.y >= g.y1 && c.y <= g.y2)
                    ? 1.0
                    : 0.0;
  } else {
    row.format_failure = true;
  }
  return row;
}

inline EvalAggregates aggregate_rows(std::span<const EvalRow> rows) {
  EvalAggregates a;
  a.num_rows = static_cast<int>(rows.size());
  if (rows.empty()) return a;
  double sum_hit = 0, sum_iou = 0, sum_total = 0, sum_lp = 0, sum_lg = 0;
  int n_iou = 0, n_lp = 0, n_fail = 0, n_ids = 0;
  std::vector<std::string> seen;
  for (const auto& r : rows) {
    sum_hit += r.r_hit;
    if (!r.point_only) {
      sum_iou += r.r_iou.value_or(0.0);
      sum_total += r.total.value_or(0.0);
      ++n_iou;
    }
    if (r.lambda_pred) {
      sum_lp += *r.lambda_pred;
      ++n_lp;
    }
    if (std::find(seen.begin(), seen.end(), r.id) == seen.end()) {
      seen.push_back(r.id);
      sum_lg += r.lambda_gt;
      ++n_ids;
    }
    if (r.format_failure) ++n_fail;
  }
  a.accuracy = sum_hit / a.num_rows;
  if (n_iou > 0) {
    a.mean_iou = sum_iou / n_iou;
    a.mean_total = sum_total / n_iou;
  }
  if (n_lp > 0) a.mean_lambda_pred = sum_lp / n_lp;
  if (n_ids > 0) a.mean_lambda_gt = sum_lg / n_ids;
  a.format_failure_rate = static_cast<double>(n_fail) / a.num_rows;
  return a;
}

/// Extreme-sample and length statistics over multi-rollout prediction
/// files: every id must carry the same number N >= 2 of rows.
inline GroupStats group_stats(std::span<const EvalRow> rows) {
  std::vector<std::string> id_order;
  std::map<std::string, std::vector<const EvalRow*>> by_id;
  for (const auto& r : rows) {
    auto [it, inserted] = by_id.try_emplace(r.id);
    if (inserted) id_order.push_back(r.id);
    it->second.push_back(&r);
  }
  const std::size_t n = by_id.begin()->second.size();
  if (n < 2) throw DomainError("group stats need at least 2 rows per id");
  for (const auto& [id, group] : by_id) {
    if (group.size() != n) {
      throw DomainError("ragged group sizes: id " + id);
    }
  }
  GroupStats out;
  out.group_size = static_cast<int>(n);
  int all_correct = 0, all_incorrect = 0;
  double sum_len_correct = 0, sum_len_incorrect = 0;
  int n_correct = 0, n_incorrect = 0;
  for (const auto& id : id_order) {
    bool any_hit = false, any_miss = false;
    for (const EvalRow* r : by_id.at(id)) {
      const bool hit = r->r_hit > 0.5;
      (hit ? any_hit : any_miss) = true;
      if (r->response_length) {
        if (hit) {
          sum_len_correct += *r->response_length;
          ++n_correct;
        } else {
          sum_len_incorrect += *r->response_length;
          ++n_incorrect;
        }
      }
    }
    if (!any_miss) ++all_correct;
    if (!any_hit) ++all_incorrect;
  }
  const double ng = static_cast<double>(id_order.size());
  out.extreme_all_correct_ratio = all_correct / ng;
  out.extreme_all_incorrect_ratio = all_incorrect / ng;
  if (n_correct > 0) out.mean_len_correct = sum_len_correct / n_correct;
  if (n_incorrect > 0) out.mean_len_incorrect = sum_len_incorrect / n_incorrect;
  return out;
}

/// Scores a prediction set against ground truth. Malformed or unresolvable
/// rows are itemized in errors and skipped; valid rows are still scored.
inline EvalReport score_predictions(std::span<const GtRecord> gt,
                                    const ParsedPredictions& preds,
                                    const RewardWeights& weights) {
  EvalReport report;
  report.errors = preds.errors;

  std::map<std::string, const GtRecord*> gt_by_id;
  for (const auto& g : gt) {
    if (!gt_by_id.emplace(g.sample.id, &g).second) {
      report.errors.push_back("duplicate ground-truth id: " + g.sample.id);
    }
  }

  std::map<std::string, int> rows_per_id;
  for (const auto& p : preds.records) {
    const auto it = gt_by_id.find(p.id);
    if (it == gt_by_id.end()) {
      report.errors.push_back("line " + std::to_string(p.line_no) +
                              ": unknown id: " + p.id);
      continue;
    }
    report.rows.push_back(score_row(p, *it->second, weights));
    rows_per_id[p.id] += 1;
  }

  report.aggregates = aggregate_rows(report.rows);

  bool has_tags = false;
  for (const auto& g : gt) has_tags |= !g.tag.empty();
  if (has_tags) {
    std::map<std::string, std::vector<EvalRow>> partitions;
    for (const auto& r : report.rows) {
      partitions[r.tag.empty() ? "untagged" : r.tag].push_back(r);
    }
    for (const auto& [tag, rows] : partitions) {
      report.by_tag.emplace(tag, aggregate_rows(rows));
    }
  }

  bool multi = false, ragged = false;
  int first = rows_per_id.empty() ? 0 : rows_per_id.begin()->second;
  for (const auto& [id, n] : rows_per_id) {
    if (n != first) ragged = true;
    if (n > 1) multi = true;
  }
  if (multi) {
    if (ragged) {
      report.errors.push_back(
          "ragged group sizes: group statistics not computed");
    } else {
      report.group_stats = group_stats(report.rows);
    }
  }
  return report;
}

inline EvalReport score_prediction_files(const std::filesystem::path& gt_path,
                                         const std::filesystem::path& pred_path,
                                         const RewardWeights& weights) {
  return score_predictions(load_gt_records(gt_path),
                           load_predictions(pred_path), weights);
}

inline std::string eval_report_csv(const EvalReport& report) {
  std::string out = "id,r_hit,r_iou,r_box,total,lambda_pred,lambda_gt\n";
  const auto opt = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };
  for (const auto& r : report.rows) {
    out += r.id;
    out += ',';
    out += format_double(r.r_hit);
    out += ',';
    out += r.format_failure ? "0" : opt(r.r_iou);
    out += ',';
    out += r.format_failure ? "0" : opt(r.r_box);
    out += ',';
    out += r.format_failure ? "0" : opt(r.total);
    out += ',';
    out += opt(r.lambda_pred);
    out += ',';
    out += format_double(r.lambda_gt);
    out += '\n';
  }
  return out;
}

inline json aggregates_to_json(const EvalAggregates& a) {
  json j;
  j["num_rows"] = a.num_rows;
  j["accuracy"] = a.accuracy;
  j["mean_iou"] = a.mean_iou;
  j["mean_total"] = a.mean_total;
  j["mean_lambda_pred"] = a.mean_lambda_pred;
  j["mean_lambda_gt"] = a.mean_lambda_gt;
  j["format_failure_rate"] = a.format_failure_rate;
  return j;
}

inline std::string eval_report_json(const EvalReport& report) {
  json j;
  j["aggregates"] = aggregates_to_json(report.aggregates);
  if (!report.by_tag.empty()) {
    json tags = json::object();
    for (const auto& [tag, agg] : report.by_tag) {
      tags[tag] = aggregates_to_json(agg);
    }
    j["by_tag"] = std::move(tags);
  }
  if (report.group_stats) {
    json g;
    g["group_size"] = report.group_stats->group_size;
    g["extreme_all_correct_ratio"] = report.group_stats->extreme_all_correct_ratio;
    g["extreme_all_incorrect_ratio"] =
        report.group_stats->extreme_all_incorrect_ratio;
    g["mean_len_correct"] = report.group_stats->mean_len_correct;
    g["mean_len_incorrect"] = report.group_stats->mean_len_incorrect;
    j["group_stats"] = std::move(g);
  }
  j["errors"] = report.errors;
  return j.dump(2);
}

}  // namespace groundrl

#endif  // GROUNDRL_EVAL_HPP_
