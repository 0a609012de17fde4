#include "crowdsd/losses.hpp"

#include <algorithm>
#include <cmath>

#include "crowdsd/errors.hpp"

namespace crowdsd {
namespace {

int count_positives(const Grid& pos_mask) {
  int m = 0;
  for (double v : pos_mask.values()) m += v > 0.5 ? 1 : 0;
  return m;
}

}  // namespace

LossConfig LossConfig::for_stride(int stride) {
  LossConfig cfg;
  cfg.balance = stride == 1 ? 1.0 / 16.0 : 1.0;
  return cfg;
}

void LossConfig::validate() const {
  if (!(gamma > 0.0) || !(delta > 0.0) || !(balance > 0.0) || !(lambda > 0.0)) {
    throw ConfigError("loss coefficients must be positive");
  }
}

LossValue focal_center_loss(const Grid& pred, const Grid& target, const Grid& pos_mask,
                            const LossConfig& cfg) {
  require_same_shape(pred, target, "focal loss: prediction and target shapes differ");
  require_same_shape(pred, pos_mask, "focal loss: prediction and mask shapes differ");
  const int m = count_positives(pos_mask);
  if (m == 0) throw NoPositives("focal loss needs at least one positive cell");

  LossValue out{0.0, Grid(pred.rows(), pred.cols(), 0.0)};
  const double inv_m = 1.0 / m;
  const double g = cfg.gamma;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double raw = pred[i];
    const bool clamped = raw < kProbClamp || raw > 1.0 - kProbClamp;
    const double q = std::clamp(raw, kProbClamp, 1.0 - kProbClamp);
    double term;
    double dterm;
    if (pos_mask[i] > 0.5) {
      // (1-q)^g ln q
      const double a = std::pow(1.0 - q, g);
      term = a * std::log(q);
      dterm = -g * std::pow(1.0 - q, g - 1.0) * std::log(q) + a / q;
    } else {
      // A (1-t)^d q^g ln(1-q)
      const double w = cfg.balance * std::pow(1.0 - target[i], cfg.delta);
      const double qg = std::pow(q, g);
      const double l1q = std::log(1.0 - q);
      term = w * qg * l1q;
      dterm = w * (g * std::pow(q, g - 1.0) * l1q - qg / (1.0 - q));
    }
    sum += term;
    out.gradient[i] = clamped ? 0.0 : -inv_m * dterm;
  }
  out.value = -inv_m * sum;
  return out;
}

SmoothL1 smooth_l1(double x) noexcept {
  const double ax = std::fabs(x);
  if (ax < 1.0) return {0.5 * x * x, x};
  return {ax - 0.5, x > 0.0 ? 1.0 : -1.0};
}

LossValue crowdedness_size_loss(const Grid& pred, const Grid& target, const Grid& pos_mask,
                                const Grid& alpha) {
  require_same_shape(pred, target, "size loss: prediction and target shapes differ");
  require_same_shape(pred, pos_mask, "size loss: prediction and mask shapes differ");
  require_same_shape(pred, alpha, "size loss: prediction and alpha shapes differ");
  const int m = count_positives(pos_mask);
  if (m == 0) throw NoPositives("size loss needs at least one positive cell");

  LossValue out{0.0, Grid(pred.rows(), pred.cols(), 0.0)};
  const double inv_m = 1.0 / m;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pos_mask[i] <= 0.5) continue;
    const SmoothL1 s = smooth_l1(pred[i] - target[i]);
    out.value += alpha[i] * s.value;
    out.gradient[i] = inv_m * alpha[i] * s.derivative;
  }
  out.value *= inv_m;
  return out;
}

OffsetLossValue offset_loss(const OffsetMap& pred, const OffsetMap& target, const Grid& pos_mask) {
  require_same_shape(pred.dx, target.dx, "offset loss: x shapes differ");
  require_same_shape(pred.dy, target.dy, "offset loss: y shapes differ");
  require_same_shape(pred.dx, pos_mask, "offset loss: mask shape differs");
  const int m = count_positives(pos_mask);
  if (m == 0) throw NoPositives("offset loss needs at least one positive cell");

  const int rows = pos_mask.rows();
  const int cols = pos_mask.cols();
  OffsetLossValue out{0.0, OffsetMap{Grid(rows, cols, 0.0), Grid(rows, cols, 0.0)}};
  const double scale = 1.0 / (2.0 * m);
  for (std::size_t i = 0; i < pos_mask.size(); ++i) {
    if (pos_mask[i] <= 0.5) continue;
    const SmoothL1 sx = smooth_l1(pred.dx[i] - target.dx[i]);
    const SmoothL1 sy = smooth_l1(pred.dy[i] - target.dy[i]);
    out.value += sx.value + sy.value;
    out.gradient.dx[i] = scale * sx.derivative;
    out.gradient.dy[i] = scale * sy.derivative;
  }
  out.value *= scale;
  return out;
}

double combined_loss(double center, double size, std::optional<double> offset,
                     const LossConfig& cfg) noexcept {
  return cfg.lambda * center + size + offset.value_or(0.0);
}

FdReport finite_difference_check(const std::function<double(const Grid&)>& loss,
                                 const Grid& input, const Grid& analytic, double epsilon,
                                 const std::function<bool(std::size_t)>& skip, double floor) {
  require_same_shape(input, analytic, "finite difference: gradient shape differs");
  FdReport report;
  Grid probe = input;
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (skip && skip(i)) {
      ++report.excluded;
      continue;
    }
    const double x = input[i];
    probe[i] = x + epsilon;
    const double up = loss(probe);
    probe[i] = x - epsilon;
    const double down = loss(probe);
    probe[i] = x;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double a = analytic[i];
    const double denom = std::max({std::fabs(a), std::fabs(numeric), floor});
    report.max_rel_error = std::max(report.max_rel_error, std::fabs(a - numeric) / denom);
    ++report.checked;
  }
  return report;
}

}  // namespace crowdsd
