#include "groundrl/eval.hpp"

#include <gtest/gtest.h>

#include <filesystem>

namespace groundrl {
namespace {

GtRecord make_gt(const std::string& id, const Box& box,
                 const std::string& tag = "") {
  GtRecord r;
  r.sample.id = id;
  r.sample.dims = ImageDims(100, 100);
  r.sample.gt = box;
  r.sample.lambda = relative_box_size(box, r.sample.dims);
  r.tag = tag;
  return r;
}

PredictionRecord box_pred(const std::string& id, const Box& box) {
  PredictionRecord p;
  p.id = id;
  p.pred = box;
  return p;
}

PredictionRecord fail_pred(const std::string& id) {
  PredictionRecord p;
  p.id = id;
  p.format_failure = true;
  return p;
}

TEST(ScoreRowTest, PerfectBox) {
  const GtRecord gt = make_gt("a", Box(10, 10, 30, 30));
  const EvalRow row = score_row(box_pred("a", Box(10, 10, 30, 30)), gt, {});
  EXPECT_EQ(row.r_hit, 1.0);
  EXPECT_EQ(*row.r_iou, 1.0);
  EXPECT_EQ(*row.r_box, 1.0);
  EXPECT_NEAR(*row.total, 1.375, 1e-12);
  EXPECT_NEAR(*row.lambda_pred, 0.2, 1e-12);
}

TEST(ScoreRowTest, FormatFailureScoresZero) {
  const GtRecord gt = make_gt("a", Box(10, 10, 30, 30));
  const EvalRow row = score_row(fail_pred("a"), gt, {});
  EXPECT_TRUE(row.format_failure);
  EXPECT_EQ(row.r_hit, 0.0);
  EXPECT_FALSE(row.r_iou.has_value());
  EXPECT_FALSE(row.lambda_pred.has_value());
}

TEST(ScoreRowTest, PointOnlyScoresHit) {
  const GtRecord gt = make_gt("a", Box(10, 10, 30, 30));
  PredictionRecord inside;
  inside.id = "a";
  inside.pred_point = Point{20, 20};
  PredictionRecord boundary = inside;
  boundary.pred_point = Point{10, 30};
  PredictionRecord outside = inside;
  outside.pred_point = Point{50, 20};
  EXPECT_EQ(score_row(inside, gt, {}).r_hit, 1.0);
  EXPECT_EQ(score_row(boundary, gt, {}).r_hit, 1.0);
  EXPECT_EQ(score_row(outside, gt, {}).r_hit, 0.0);
  const EvalRow row = score_row(inside, gt, {});
  EXPECT_TRUE(row.point_only);
  EXPECT_FALSE(row.r_iou.has_value());
}

TEST(ScorePredictionsTest, PerfectSet) {
  std::vector<GtRecord> gt{make_gt("a", Box(0, 0, 50, 50)),
                           make_gt("b", Box(10, 10, 90, 90)),
                           make_gt("c", Box(20, 0, 40, 100))};
  ParsedPredictions preds;
  for (const auto& g : gt) preds.records.push_back(box_pred(g.sample.id, g.sample.gt));
  const EvalReport rep = score_predictions(gt, preds, {});
  ASSERT_TRUE(rep.ok());
  EXPECT_EQ(rep.aggregates.num_rows, 3);
  EXPECT_EQ(rep.aggregates.accuracy, 1.0);
  EXPECT_EQ(rep.aggregates.mean_iou, 1.0);
  EXPECT_NEAR(rep.aggregates.mean_total, 1.375, 1e-12);
  EXPECT_EQ(rep.aggregates.format_failure_rate, 0.0);
  EXPECT_FALSE(rep.group_stats.has_value());
}

TEST(ScorePredictionsTest, AllFailures) {
  std::vector<GtRecord> gt{make_gt("a", Box(0, 0, 50, 50)),
                           make_gt("b", Box(10, 10, 90, 90))};
  ParsedPredictions preds;
  preds.records.push_back(fail_pred("a"));
  preds.records.push_back(fail_pred("b"));
  const EvalReport rep = score_predictions(gt, preds, {});
  EXPECT_EQ(rep.aggregates.accuracy, 0.0);
  EXPECT_EQ(rep.aggregates.mean_iou, 0.0);
  EXPECT_EQ(rep.aggregates.format_failure_rate, 1.0);
}

TEST(ScorePredictionsTest, KnownMixedFixture) {
  // exact match, the 1/7 overlap pair, and a clean miss
  std::vector<GtRecord> gt{make_gt("a", Box(0, 0, 20, 20)),
                           make_gt("b", Box(0, 0, 20, 20)),
                           make_gt("c", Box(0, 0, 20, 20))};
  ParsedPredictions preds;
  preds.records.push_back(box_pred("a", Box(0, 0, 20, 20)));
  preds.records.push_back(box_pred("b", Box(10, 10, 30, 30)));
  preds.records.push_back(box_pred("c", Box(50, 50, 70, 70)));
  const EvalReport rep = score_predictions(gt, preds, {});
  ASSERT_EQ(rep.rows.size(), 3u);
  EXPECT_EQ(*rep.rows[0].r_iou, 1.0);
  EXPECT_NEAR(*rep.rows[1].r_iou, 1.0 / 7.0, 1e-15);
  EXPECT_EQ(*rep.rows[2].r_iou, 0.0);
  EXPECT_NEAR(rep.aggregates.mean_iou, (1.0 + 1.0 / 7.0) / 3.0, 1e-12);
  // a hits exactly, b's center (20,20) lands on the inclusive gt corner
  EXPECT_NEAR(rep.aggregates.accuracy, 2.0 / 3.0, 1e-12);
}

TEST(ScorePredictionsTest, ErrorsItemizedAndScoringContinues) {
  std::vector<GtRecord> gt{make_gt("a", Box(0, 0, 50, 50))};
  ParsedPredictions preds;
  preds.records.push_back(box_pred("a", Box(0, 0, 50, 50)));
  PredictionRecord unknown = box_pred("zz", Box(0, 0, 10, 10));
  unknown.line_no = 2;
  preds.records.push_back(unknown);
  preds.errors.push_back("preds.jsonl:3: parse error");
  const EvalReport rep = score_predictions(gt, preds, {});
  EXPECT_FALSE(rep.ok());
  ASSERT_EQ(rep.errors.size(), 2u);
  EXPECT_NE(rep.errors[1].find("unknown id: zz"), std::string::npos);
  EXPECT_NE(rep.errors[1].find("line 2"), std::string::npos);
  // the valid row was still scored
  EXPECT_EQ(rep.rows.size(), 1u);
  EXPECT_EQ(rep.aggregates.accuracy, 1.0);
}

TEST(ScorePredictionsTest, DuplicateGtIdReported) {
  std::vector<GtRecord> gt{make_gt("a", Box(0, 0, 50, 50)),
                           make_gt("a", Box(10, 10, 60, 60))};
  ParsedPredictions preds;
  preds.records.push_back(box_pred("a", Box(0, 0, 50, 50)));
  const EvalReport rep = score_predictions(gt, preds, {});
  ASSERT_FALSE(rep.ok());
  EXPECT_NE(rep.errors[0].find("duplicate ground-truth id"), std::string::npos);
}

TEST(GroupStatsTest, ExtremePatterns) {
  // patterns per id: {hit,hit}, {miss,miss}, {hit,miss}, {miss,hit}
  std::vector<GtRecord> gt{make_gt("a", Box(0, 0, 50, 50)),
                           make_gt("b", Box(0, 0, 50, 50)),
                           make_gt("c", Box(0, 0, 50, 50)),
                           make_gt("d", Box(0, 0, 50, 50))};
  const Box hit(0, 0, 50, 50);
  const Box miss(60, 60, 90, 90);
  ParsedPredictions preds;
  preds.records.push_back(box_pred("a", hit));
  preds.records.push_back(box_pred("a", hit));
  preds.records.push_back(box_pred("b", miss));
  preds.records.push_back(box_pred("b", miss));
  preds.records.push_back(box_pred("c", hit));
  preds.records.push_back(box_pred("c", miss));
  preds.records.push_back(box_pred("d", miss));
  preds.records.push_back(box_pred("d", hit));
  for (std::size_t i = 0; i < preds.records.size(); ++i) {
    preds.records[i].response_length = static_cast<int>(4 + i % 3);
  }
  const EvalReport rep = score_predictions(gt, preds, {});
  ASSERT_TRUE(rep.group_stats.has_value());
  EXPECT_EQ(rep.group_stats->group_size, 2);
  EXPECT_EQ(rep.group_stats->extreme_all_correct_ratio, 0.25);
  EXPECT_EQ(rep.group_stats->extreme_all_incorrect_ratio, 0.25);
  // lengths cycle 4,5,6: hits at rows 0,1,4,7 and misses at rows 2,3,5,6
  EXPECT_DOUBLE_EQ(rep.group_stats->mean_len_correct, (4 + 5 + 5 + 5) / 4.0);
  EXPECT_DOUBLE_EQ(rep.group_stats->mean_len_incorrect, (6 + 4 + 6 + 4) / 4.0);
}

TEST(GroupStatsTest, RaggedGroupsReportedNotComputed) {
  std::vector<GtRecord> gt{make_gt("a", Box(0, 0, 50, 50)),
                           make_gt("b", Box(0, 0, 50, 50))};
  ParsedPredictions preds;
  preds.records.push_back(box_pred("a", Box(0, 0, 50, 50)));
  preds.records.push_back(box_pred("a", Box(0, 0, 50, 50)));
  preds.records.push_back(box_pred("b", Box(0, 0, 50, 50)));
  const EvalReport rep = score_predictions(gt, preds, {});
  EXPECT_FALSE(rep.group_stats.has_value());
  ASSERT_FALSE(rep.ok());
  EXPECT_NE(rep.errors[0].find("ragged"), std::string::npos);
}

TEST(AggregatesTest, PermutationInvariant) {
  std::vector<GtRecord> gt;
  ParsedPredictions preds;
  Rng rng(13);
  for (int i = 0; i < 20; ++i) {
    const std::string id = "s" + std::to_string(i);
    gt.push_back(make_gt(id, Box(10, 10, 10 + 4 * (i + 1), 60)));
    if (i % 3 == 0) {
      preds.records.push_back(fail_pred(id));
    } else {
      preds.records.push_back(
          box_pred(id, Box(5 + i, 5, 40 + i, 50 + rng.uniform_int(40))));
    }
  }
  const EvalReport base = score_predictions(gt, preds, {});
  ParsedPredictions shuffled = preds;
  for (int i = 19; i > 0; --i) {
    std::swap(shuffled.records[i], shuffled.records[rng.uniform_int(i + 1)]);
  }
  const EvalReport after = score_predictions(gt, shuffled, {});
  EXPECT_NEAR(after.aggregates.accuracy, base.aggregates.accuracy, 1e-12);
  EXPECT_NEAR(after.aggregates.mean_iou, base.aggregates.mean_iou, 1e-12);
  EXPECT_NEAR(after.aggregates.mean_total, base.aggregates.mean_total, 1e-12);
  EXPECT_NEAR(after.aggregates.mean_lambda_pred,
              base.aggregates.mean_lambda_pred, 1e-12);
  EXPECT_NEAR(after.aggregates.mean_lambda_gt, base.aggregates.mean_lambda_gt,
              1e-12);
}

TEST(TagPartitionTest, ByTagAggregates) {
  std::vector<GtRecord> gt{make_gt("a", Box(0, 0, 50, 50), "web"),
                           make_gt("b", Box(0, 0, 50, 50), "web"),
                           make_gt("c", Box(0, 0, 50, 50), "mobile"),
                           make_gt("d", Box(0, 0, 50, 50))};
  ParsedPredictions preds;
  preds.records.push_back(box_pred("a", Box(0, 0, 50, 50)));
  preds.records.push_back(fail_pred("b"));
  preds.records.push_back(box_pred("c", Box(0, 0, 50, 50)));
  preds.records.push_back(box_pred("d", Box(60, 60, 90, 90)));
  const EvalReport rep = score_predictions(gt, preds, {});
  ASSERT_EQ(rep.by_tag.size(), 3u);
  EXPECT_EQ(rep.by_tag.at("web").num_rows, 2);
  EXPECT_EQ(rep.by_tag.at("web").accuracy, 0.5);
  EXPECT_EQ(rep.by_tag.at("mobile").accuracy, 1.0);
  EXPECT_EQ(rep.by_tag.at("untagged").accuracy, 0.0);
}

TEST(RoundTripTest, DatasetAndPredictionsThroughFiles) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "groundrl_eval_test";
  fs::create_directories(dir);
  auto ds = generate_dataset(6, ImageDims(640, 480), 8, {0.2, 0.8}, 21);
  assign_difficulty_weights(ds);
  save_dataset(dir / "gt.jsonl", ds);
  const auto loaded = load_dataset(dir / "gt.jsonl");
  ASSERT_EQ(loaded.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(loaded[i].id, ds[i].id);
    EXPECT_EQ(loaded[i].gt, ds[i].gt);
    EXPECT_EQ(loaded[i].lambda, ds[i].lambda);
    EXPECT_EQ(loaded[i].w_q.w_q, ds[i].w_q.w_q);
  }

  std::vector<PredictionRecord> preds;
  for (const auto& s : ds) preds.push_back(box_pred(s.id, s.gt));
  preds[0].response_length = 7;
  write_file_atomic(dir / "preds.jsonl", predictions_to_jsonl(preds));
  const EvalReport rep =
      score_prediction_files(dir / "gt.jsonl", dir / "preds.jsonl", {});
  ASSERT_TRUE(rep.ok());
  EXPECT_EQ(rep.aggregates.accuracy, 1.0);
  EXPECT_NEAR(rep.aggregates.mean_total, 1.375, 1e-12);
  fs::remove_all(dir);
}

TEST(LoadPredictionsTest, MalformedRowsItemized) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "groundrl_eval_test2";
  fs::create_directories(dir);
  const std::string text =
      R"({"id": "a", "bbox": [0, 0, 10, 10]})"
      "\n"
      "not json\n"
      R"({"id": "b"})"
      "\n"
      R"({"id": "c", "bbox": [20, 20, 5, 5]})"
      "\n";
  write_file_atomic(dir / "preds.jsonl", text);
  const ParsedPredictions preds = load_predictions(dir / "preds.jsonl");
  // rows 2 and 3 fail; the inverted box on row 4 becomes a format failure
  ASSERT_EQ(preds.errors.size(), 2u);
  EXPECT_NE(preds.errors[0].find(":2:"), std::string::npos);
  EXPECT_NE(preds.errors[1].find(":3:"), std::string::npos);
  ASSERT_EQ(preds.records.size(), 2u);
  EXPECT_TRUE(preds.records[1].format_failure);
  fs::remove_all(dir);
}

TEST(EvalCsvTest, HeaderAndRowShape) {
  std::vector<GtRecord> gt{make_gt("a", Box(0, 0, 50, 50))};
  ParsedPredictions preds;
  preds.records.push_back(box_pred("a", Box(0, 0, 50, 50)));
  preds.records.push_back(fail_pred("a"));
  const EvalReport rep = score_predictions(gt, preds, {});
  const std::string csv = eval_report_csv(rep);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "id,r_hit,r_iou,r_box,total,lambda_pred,lambda_gt");
  EXPECT_NE(csv.find("a,1,1,1,1.375,0.5,0.5"), std::string::npos);
  EXPECT_NE(csv.find("a,0,0,0,0,,0.5"), std::string::npos);
}

}  // namespace
}  // namespace groundrl
