#pragma once

#include <cmath>

#include "vesselplan/grid.hpp"

namespace vplan {

struct LossConfig {
  double omega1 = 1.0;   // Dice weight, main output
  double omega2 = 0.5;   // Focal Tversky weight, main output
  double omega3 = 1.0;   // Dice weight, auxiliary output
  double omega4 = 0.5;   // Focal Tversky weight, auxiliary output
  double alpha = 0.7;    // false-positive penalty
  double beta = 0.3;     // false-negative penalty
  double gamma = 0.75;   // focal exponent
  double epsilon = 1e-6;

  void validate() const {
    if (omega1 < 0 || omega2 < 0 || omega3 < 0 || omega4 < 0)
      throw InvalidParameter("loss config: omega weights must be >= 0");
    if (alpha < 0 || beta < 0) throw InvalidParameter("loss config: alpha/beta must be >= 0");
    if (!(gamma > 0)) throw InvalidParameter("loss config: gamma must be > 0");
    if (!(epsilon > 0)) throw InvalidParameter("loss config: epsilon must be > 0");
  }
};

namespace detail {

inline void check_same_shape(const Grid& pred, const BinaryMask& target, const char* who) {
  if (pred.width() != target.width() || pred.height() != target.height())
    throw InvalidInput(std::string(who) + ": prediction and target shapes differ");
}

}  // namespace detail

// Soft Dice loss: 1 - (2*sum(py) + eps) / (sum(p^2) + sum(y^2) + eps).
inline double dice_loss(const Grid& pred, const BinaryMask& target, double epsilon = 1e-6) {
  detail::check_same_shape(pred, target, "dice_loss");
  if (!(epsilon > 0)) throw InvalidParameter("dice_loss: epsilon must be > 0");
  double inter = 0.0, p2 = 0.0, y2 = 0.0;
  for (int r = 0; r < pred.height(); ++r)
    for (int c = 0; c < pred.width(); ++c) {
      double p = pred.at(r, c);
      double y = target.at(r, c);
      inter += p * y;
      p2 += p * p;
      y2 += y;  // y in {0,1} so y^2 == y
    }
  return 1.0 - (2.0 * inter + epsilon) / (p2 + y2 + epsilon);
}

// Focal Tversky loss: (1 - (TP+eps)/(TP + a*FP + b*FN + eps))^gamma.
inline double focal_tversky_loss(const Grid& pred, const BinaryMask& target, double alpha = 0.7,
                                 double beta = 0.3, double gamma = 0.75, double epsilon = 1e-6) {
  detail::check_same_shape(pred, target, "focal_tversky_loss");
  if (alpha < 0 || beta < 0) throw InvalidParameter("focal_tversky_loss: alpha/beta must be >= 0");
  if (!(gamma > 0)) throw InvalidParameter("focal_tversky_loss: gamma must be > 0");
  if (!(epsilon > 0)) throw InvalidParameter("focal_tversky_loss: epsilon must be > 0");
  double tp = 0.0, fp = 0.0, fn = 0.0;
  for (int r = 0; r < pred.height(); ++r)
    for (int c = 0; c < pred.width(); ++c) {
      double p = pred.at(r, c);
      double y = target.at(r, c);
      tp += p * y;
      fp += p * (1.0 - y);
      fn += (1.0 - p) * y;
    }
  double tversky = (tp + epsilon) / (tp + alpha * fp + beta * fn + epsilon);
  return std::pow(1.0 - tversky, gamma);
}

// Weighted sum of Dice and Focal Tversky over the main and auxiliary outputs.
inline double hybrid_total_loss(const Grid& pred_main, const Grid& pred_aux,
                                const BinaryMask& target, const LossConfig& cfg = {}) {
  cfg.validate();
  detail::check_same_shape(pred_main, target, "hybrid_total_loss(main)");
  detail::check_same_shape(pred_aux, target, "hybrid_total_loss(aux)");
  return cfg.omega1 * dice_loss(pred_main, target, cfg.epsilon) +
         cfg.omega2 * focal_tversky_loss(pred_main, target, cfg.alpha, cfg.beta, cfg.gamma, cfg.epsilon) +
         cfg.omega3 * dice_loss(pred_aux, target, cfg.epsilon) +
         cfg.omega4 * focal_tversky_loss(pred_aux, target, cfg.alpha, cfg.beta, cfg.gamma, cfg.epsilon);
}

}  // namespace vplan
