#ifndef GROUNDRL_REWARDS_HPP_
#define GROUNDRL_REWARDS_HPP_

#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>

#include "groundrl/geometry.hpp"

namespace groundrl {

struct RewardWeights {
  double alpha = 0.25;   // weight on the IoU reward
  double beta = 0.125;   // weight on the box-size reward
};

/// Per-response reward components. When format_ok is false every component
/// is zero: an unparseable output earns nothing, otherwise the size reward
/// would pay out even for garbage.
struct RewardBreakdown {
  double r_hit = 0.0;
  double r_iou = 0.0;
  double r_box = 0.0;
  bool format_ok = false;
  double total = 0.0;
};

// Call counters used by tests to assert which reward paths a given
// training configuration actually exercises.
struct RewardCallCounters {
  static std::atomic<std::uint64_t>& iou_calls() {
    static std::atomic<std::uint64_t> n{0};
    return n;
  }
  static std::atomic<std::uint64_t>& box_calls() {
    static std::atomic<std::uint64_t> n{0};
    return n;
  }
};

/// 1 if the center of the predicted box lies inside the ground-truth box
/// (boundary inclusive), else 0.
inline double reward_hit(const Box& pred, const Box& gt) {
  const Point c = center(pred);
  const bool in = c.x >= gt.x1 && c.x <= gt.x2 && c.y >= gt.y1 && c.y <= gt.y2;
  return in ? 1.0 : 0.0;
}

inline double reward_iou(const Box& pred, const Box& gt) {
  RewardCallCounters::iou_calls().fetch_add(1, std::memory_order_relaxed);
  return iou(pred, gt);
}

/// Box-size reward: 4 / sum of 1/(1 - d) over the four normalized edge
/// deviations d. Equals 1 iff the boxes match exactly and decays as any
/// edge drifts. A deviation approaching a full image dimension makes a
/// term singular; the continuous limit there is 0, which is what we return.
inline double reward_box(const Box& pred, const Box& gt,
                         const ImageDims& dims) {
  RewardCallCounters::box_calls().fetch_add(1, std::memory_order_relaxed);
  constexpr double kEps = 1e-6;
  const double d[4] = {
      std::abs(pred.x1 - gt.x1) / dims.width,
      std::abs(pred.x2 - gt.x2) / dims.width,
      std::abs(pred.y1 - gt.y1) / dims.height,
      std::abs(pred.y2 - gt.y2) / dims.height,
  };
  double denom = 0.0;
  for (double di : d) {
    if (di >= 1.0 - kEps) return 0.0;
    denom += 1.0 / (1.0 - di);
  }
  return 4.0 / denom;
}

// Reward signal ablations: which components feed the scalar used for
// advantage computation. Single-component modes never evaluate the other
// components (see RewardCallCounters).
enum class RewardMode { kHitOnly, kIoUOnly, kHitPlusIoU, kCombined };

/// Combined reward R_hit + alpha*R_iou + beta*R_box behind the format gate.
inline RewardBreakdown reward_combined(const std::optional<Box>& parsed,
                                       const Box& gt, const ImageDims& dims,
                                       const RewardWeights& w) {
  RewardBreakdown out;
  if (!parsed.has_value()) return out;
  out.format_ok = true;
  out.r_hit = reward_hit(*parsed, gt);
  out.r_iou = reward_iou(*parsed, gt);
  out.r_box = reward_box(*parsed, gt, dims);
  out.total = out.r_hit + w.alpha * out.r_iou + w.beta * out.r_box;
  return out;
}

/// Mode-restricted scoring. The breakdown's total carries only the
/// components the mode selects; unselected components stay zero and are
/// never computed.
inline RewardBreakdown reward_for_mode(RewardMode mode,
                                       const std::optional<Box>& parsed,
                                       const Box& gt, const ImageDims& dims,
                                       const RewardWeights& w) {
  if (mode == RewardMode::kCombined) return reward_combined(parsed, gt, dims, w);
  RewardBreakdown out;
  if (!parsed.has_value()) return out;
  out.format_ok = true;
  switch (mode) {
    case RewardMode::kHitOnly:
      out.r_hit = reward_hit(*parsed, gt);
      out.total = out.r_hit;
      break;
    case RewardMode::kIoUOnly:
      out.r_iou = reward_iou(*parsed, gt);
      out.total = out.r_iou;
      break;
    case RewardMode::kHitPlusIoU:
      out.r_hit = reward_hit(*parsed, gt);
      out.r_iou = reward_iou(*parsed, gt);
      out.total = out.r_hit + w.alpha * out.r_iou;
      break;
    case RewardMode::kCombined:
      break;
  }
  return out;
}

}  // namespace groundrl

#endif  // GROUNDRL_REWARDS_HPP_
