#pragma once

#include "tomo/autodiff/tensor.hpp"

#include <cstdint>
#include <vector>

namespace tomo::ad {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct ParamGroup {
    std::vector<Parameter*> params;
    double lr = 1e-3;
};

/// Adam with bias correction. Buffers and frozen parameters are skipped.
class Adam {
public:
    struct Slot {
        Parameter* param = nullptr;
        double lr = 0.0;
        Tensor m;
        Tensor v;
    };

    explicit Adam(std::vector<ParamGroup> groups, AdamConfig cfg = {});

    void step();
    void zero_grad();

    std::int64_t steps() const { return t_; }
    const AdamConfig& config() const { return cfg_; }
    std::vector<Slot>& slots() { return slots_; }
    const std::vector<Slot>& slots() const { return slots_; }
    void set_steps(std::int64_t t) { t_ = t; }

private:
    std::vector<Slot> slots_;
    AdamConfig cfg_;
    std::int64_t t_ = 0;
};

}  // namespace tomo::ad
