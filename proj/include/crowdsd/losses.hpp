#pragma once

#include <functional>
#include <optional>

#include "crowdsd/grid.hpp"
#include "crowdsd/raster.hpp"

namespace crowdsd {

struct LossConfig {
  double gamma = 2.0;    // focal exponent
  double delta = 4.0;    // negative-penalty exponent
  double balance = 1.0;  // A: 1 at stride 4, 1/16 at stride 1
  double lambda = 0.1;   // center-loss weight in the combined objective

  static LossConfig for_stride(int stride);
  void validate() const;
};

// Predictions are clamped to [kProbClamp, 1 - kProbClamp]; the gradient is
// zero wherever the clamp is active.
inline constexpr double kProbClamp = 1e-7;

struct LossValue {
  double value = 0.0;
  Grid gradient;  // d value / d prediction, same shape as the prediction
};

struct OffsetLossValue {
  double value = 0.0;
  OffsetMap gradient;
};

// Focal cross-entropy over every heatmap cell, normalized by the number of
// positives M. Throws NoPositives when M = 0.
LossValue focal_center_loss(const Grid& pred, const Grid& target, const Grid& pos_mask,
                            const LossConfig& cfg);

struct SmoothL1 {
  double value = 0.0;
  double derivative = 0.0;
};
SmoothL1 smooth_l1(double x) noexcept;

// (1/M) sum_j alpha_j SmoothL1(pred_j - target_j) over positive cells. With
// every alpha equal to one this is the plain smooth-L1 size loss.
LossValue crowdedness_size_loss(const Grid& pred, const Grid& target, const Grid& pos_mask,
                                const Grid& alpha);

// Mean over positive cells and both channels of SmoothL1(residual).
OffsetLossValue offset_loss(const OffsetMap& pred, const OffsetMap& target, const Grid& pos_mask);

// lambda * center + size (+ offset when present).
double combined_loss(double center, double size, std::optional<double> offset,
                     const LossConfig& cfg) noexcept;

struct FdReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;
};

// Compares an analytic gradient against central differences of `loss` at
// every cell of `input`. Cells for which `skip` returns true (kinks, clamp
// boundaries) are counted in `excluded` instead. Relative error per cell is
// |a - n| / max(|a|, |n|, floor).
FdReport finite_difference_check(const std::function<double(const Grid&)>& loss,
                                 const Grid& input, const Grid& analytic, double epsilon = 1e-5,
                                 const std::function<bool(std::size_t)>& skip = {},
                                 double floor = 1e-6);

}  // namespace crowdsd
