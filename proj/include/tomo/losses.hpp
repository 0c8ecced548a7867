#pragma once

#include "tomo/autodiff/graph.hpp"

namespace tomo {

/// Mean squared error between predicted magnitudes and the target, normalized
/// by element count.
ad::Var loss_pre(const ad::Var& pred, const ad::Var& target);

/// loss_pre(pred, target) + lambda * mean |pred|.
ad::Var loss_full(const ad::Var& pred, const ad::Var& target, double lambda);

/// Plain evaluations of the same quantities.
double loss_pre_value(const Eigen::ArrayXd& pred, const Eigen::ArrayXd& target);
double loss_full_value(const Eigen::ArrayXd& pred, const Eigen::ArrayXd& target, double lambda);

}  // namespace tomo
