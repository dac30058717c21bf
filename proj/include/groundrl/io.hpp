#ifndef GROUNDRL_IO_HPP_
#define GROUNDRL_IO_HPP_

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "groundrl/policy_env.hpp"

namespace groundrl {

using json = nlohmann::json;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shortest decimal representation that round-trips the double exactly.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Writes via a temp file in the same directory, then renames into place.
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path tmp = path.string() + ".tmp";
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out << content;
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Dataset JSON-lines: {"id", "image_width", "image_height", "bbox": [x1,y1,x2,y2]}
// plus an optional "tag" passed through to evaluation reports.
// ---------------------------------------------------------------------------

struct GtRecord {
  GroundingSample sample;
  std::string tag;  // empty when absent
};

inline std::string dataset_to_jsonl(std::span<const GroundingSample> dataset) {
  std::string out;
  for (const auto& s : dataset) {
    json j;
    j["id"] = s.id;
    j["image_width"] = s.dims.width;
    j["image_height"] = s.dims.height;
    j["bbox"] = {s.gt.x1, s.gt.y1, s.gt.x2, s.gt.y2};
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline void save_dataset(const std::filesystem::path& path,
                         std::span<const GroundingSample> dataset) {
  write_file_atomic(path, dataset_to_jsonl(dataset));
}

/// Loads ground-truth samples and recomputes the cached difficulty
/// quantities (lambda per sample, w_q over the whole file).
inline std::vector<GtRecord> load_gt_records(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  std::vector<GtRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      const auto& bb = j.at("bbox");
      GroundingSample s{
          j.at("id").get<std::string>(),
          ImageDims(j.at("image_width").get<double>(),
                    j.at("image_height").get<double>()),
          Box(bb.at(0).get<double>(), bb.at(1).get<double>(),
              bb.at(2).get<double>(), bb.at(3).get<double>())};
      s.lambda = relative_box_size(s.gt, s.dims);
      out.push_back({std::move(s), j.value("tag", std::string())});
    } catch (const std::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": " +
                    e.what());
    }
  }
  std::vector<GroundingSample> tmp;
  tmp.reserve(out.size());
  for (auto& r : out) tmp.push_back(r.sample);
  assign_difficulty_weights(tmp);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].sample.w_q = tmp[i].w_q;
  return out;
}

inline std::vector<GroundingSample> load_dataset(
    const std::filesystem::path& path) {
  std::vector<GroundingSample> out;
  for (auto& r : load_gt_records(path)) out.push_back(std::move(r.sample));
  return out;
}

// ---------------------------------------------------------------------------
// Prediction JSON-lines: one of
//   {"id": ..., "bbox": [x1,y1,x2,y2]}
//   {"id": ..., "point": [x,y]}
//   {"id": ..., "format_failure": true}
// each optionally carrying "response_length".
// ---------------------------------------------------------------------------

struct PredictionRecord {
  std::string id;
  std::optional<Box> pred;          // box prediction
  std::optional<Point> pred_point;  // point-only prediction
  bool format_failure = false;
  std::optional<int> response_length;
  int line_no = 0;
};

inline std::string predictions_to_jsonl(
    std::span<const PredictionRecord> preds) {
  std::string out;
  for (const auto& p : preds) {
    json j;
    j["id"] = p.id;
    if (p.pred) {
      j["bbox"] = {p.pred->x1, p.pred->y1, p.pred->x2, p.pred->y2};
    } else if (p.pred_point) {
      j["point"] = {p.pred_point->x, p.pred_point->y};
    } else {
      j["format_failure"] = true;
    }
    if (p.response_length) j["response_length"] = *p.response_length;
    out += j.dump();
    out += '\n';
  }
  return out;
}

struct ParsedPredictions {
  std::vector<PredictionRecord> records;
  std::vector<std::string> errors;  // itemized, with line numbers
};

inline ParsedPredictions load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  ParsedPredictions out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      PredictionRecord r;
      r.id = j.at("id").get<std::string>();
      r.line_no = line_no;
      if (j.contains("bbox")) {
        const auto& bb = j.at("bbox");
        try {
          r.pred = Box(bb.at(0).get<double>(), bb.at(1).get<double>(),
                       bb.at(2).get<double>(), bb.at(3).get<double>());
        } catch (const DegenerateBoxError&) {
          // An inverted box is a model output problem, not a file problem.
          r.format_failure = true;
        }
      } else if (j.contains("point")) {
        const auto& pt = j.at("point");
        r.pred_point = Point{pt.at(0).get<double>(), pt.at(1).get<double>()};
      } else if (j.value("format_failure", false)) {
        r.format_failure = true;
      } else {
        throw IoError("row has none of bbox/point/format_failure");
      }
      if (j.contains("response_length")) {
        r.response_length = j.at("response_length").get<int>();
      }
      out.records.push_back(std::move(r));
    } catch (const std::exception& e) {
      out.errors.push_back(path.string() + ":" + std::to_string(line_no) +
                           ": " + e.what());
    }
  }
  return out;
}

}  // namespace groundrl

#endif  // GROUNDRL_IO_HPP_
