#include "tomo/losses.hpp"

#include "tomo/autodiff/ops.hpp"

#include <stdexcept>

namespace tomo {

namespace {

void require_same(const ad::Shape& a, const ad::Shape& b, const char* op) {
    if (a != b) throw std::invalid_argument(std::string(op) + ": shape mismatch " + ad::to_string(a) + " vs " + ad::to_string(b));
}

}  // namespace

ad::Var loss_pre(const ad::Var& pred, const ad::Var& target) {
    require_same(pred.shape(), target.shape(), "loss_pre");
    return ad::mse(pred, target);
}

ad::Var loss_full(const ad::Var& pred, const ad::Var& target, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("loss_full: lambda must be >= 0");
    const ad::Var l2 = loss_pre(pred, target);
    if (lambda == 0.0) return l2;
    return ad::add(l2, ad::scale(ad::mean_abs(pred), lambda));
}

double loss_pre_value(const Eigen::ArrayXd& pred, const Eigen::ArrayXd& target) {
    if (pred.size() != target.size()) throw std::invalid_argument("loss_pre: size mismatch");
    if (pred.size() == 0) return 0.0;
    return (pred - target).square().sum() / static_cast<double>(pred.size());
}

double loss_full_value(const Eigen::ArrayXd& pred, const Eigen::ArrayXd& target, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("loss_full: lambda must be >= 0");
    const double l2 = loss_pre_value(pred, target);
    if (lambda == 0.0 || pred.size() == 0) return l2;
    return l2 + lambda * pred.abs().sum() / static_cast<double>(pred.size());
}

}  // namespace tomo
