#include "tomo/autodiff/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace tomo::ad {

Adam::Adam(std::vector<ParamGroup> groups, AdamConfig cfg) : cfg_(cfg) {
    for (const auto& grp : groups) {
        if (!(grp.lr > 0.0)) throw std::invalid_argument("Adam: learning rate must be > 0");
        for (Parameter* p : grp.params) {
            if (!p->trainable) continue;
            slots_.push_back({p, grp.lr, Tensor::zeros_like(p->value), Tensor::zeros_like(p->value)});
        }
    }
}

void Adam::zero_grad() {
    for (auto& s : slots_) s.param->zero_grad();
}

void Adam::step() {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& s : slots_) {
        Parameter& p = *s.param;
        if (p.frozen) continue;
        if (p.grad.shape() != p.value.shape()) p.zero_grad();
        const Eigen::ArrayXd& g = p.grad.values();
        s.m.values() = cfg_.beta1 * s.m.values() + (1.0 - cfg_.beta1) * g;
        s.v.values() = cfg_.beta2 * s.v.values() + (1.0 - cfg_.beta2) * g.square();
        p.value.values() -= s.lr * (s.m.values() / c1) / ((s.v.values() / c2).sqrt() + cfg_.eps);
    }
}

}  // namespace tomo::ad
