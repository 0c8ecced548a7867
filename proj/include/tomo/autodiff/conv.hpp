#pragma once

#include "tomo/autodiff/graph.hpp"

namespace tomo::ad {

/// Stride-1 convolution with zero padding k/2 (odd k). x: (N, Cin, H, W),
/// weight: (Cout, Cin, k, k), bias: (Cout).
Var conv2d(const Var& x, const Var& weight, const Var& bias);

/// Kernel 2, stride 2 transposed convolution doubling H and W.
/// x: (N, Cin, H, W), weight: (Cin, Cout, 2, 2), bias: (Cout).
Var conv_transpose2x2(const Var& x, const Var& weight, const Var& bias);

/// 2x2 max pooling, stride 2. Odd H or W is rejected; pad upstream.
Var maxpool2x2(const Var& x);

struct BatchNormOptions {
    bool training = true;
    double momentum = 0.1;
    double eps = 1e-5;
};

/// Per-channel batch normalization over (N, H, W). In training mode the
/// batch statistics normalize and the running buffers are updated in place
/// (running_var receives the unbiased batch variance).
Var batchnorm2d(const Var& x, const Var& gamma, const Var& beta, Parameter& running_mean, Parameter& running_var,
                const BatchNormOptions& opts);

/// (N, Ca, H, W) ++ (N, Cb, H, W) -> (N, Ca + Cb, H, W)
Var concat_channels(const Var& a, const Var& b);

}  // namespace tomo::ad
