#pragma once

#include "tomo/autodiff/graph.hpp"
#include "tomo/autodiff/ops.hpp"
#include "tomo/geometry.hpp"
#include "tomo/simulator.hpp"
#include "tomo/volume.hpp"

#include <memory>
#include <vector>

namespace tomo {

/// Unfolded pre-imaging network: K blocks of
///   Gamma_k = h_{theta_k}(W1_k G + W2_k Gamma_{k-1}),  Gamma_0 = 0,
/// with untied complex weights W1_k (L x N), W2_k (L x L) and a learnable
/// threshold theta_k = softplus(raw_k) >= 0. Applied column-wise to echo
/// slices G (N x M).
class PreNet {
public:
    PreNet(Eigen::Index baselines, Eigen::Index bins, int blocks);

    int blocks() const { return static_cast<int>(blocks_.size()); }
    Eigen::Index baselines() const { return baselines_; }
    Eigen::Index bins() const { return bins_; }

    /// Smoothing of the soft-threshold modulus; 0 gives the exact operator.
    double smoothing = 1e-8;

    Eigen::MatrixXcd w1(int k) const;
    Eigen::MatrixXcd w2(int k) const;
    double threshold(int k) const;
    void set_w1(int k, const Eigen::MatrixXcd& w);
    void set_w2(int k, const Eigen::MatrixXcd& w);
    void set_threshold(int k, double theta);

    /// Names follow prenet.block{k}.W1 / W2 / theta (k from 1). Complex
    /// weights are stored as (2, rows, cols) with real then imaginary planes;
    /// theta stores the softplus pre-activation.
    std::vector<ad::Parameter*> parameters();

    /// Real scalars across all parameters.
    Eigen::Index parameter_count() const;

    /// Differentiable forward. G.re / G.im are (N, M); returns (L, M) parts.
    ad::CVar forward(ad::Graph& g, const ad::CVar& G);

private:
    struct Block {
        ad::Parameter w1;
        ad::Parameter w2;
        ad::Parameter theta;
    };
    Eigen::Index baselines_;
    Eigen::Index bins_;
    std::vector<Block> blocks_;
};

/// W1_k = step A^H, W2_k = I - step A^H A, theta_k = theta for every block.
PreNet prenet_init_from_geometry(const SteeringMatrix& A, double step, double theta, int blocks = 5);

/// Inference on one slice (N x M) -> (L x M).
Eigen::MatrixXcd prenet_forward(const Eigen::MatrixXcd& G, PreNet& net);

/// Runs the network on every azimuth-elevation slice (one per range index)
/// and assembles the complex (range, azimuth, elevation) volume.
ComplexVolume pre_image_volume(const EchoTensor& echoes, PreNet& net);

/// Graph constants holding the echo columns [first, first + count) as (N, count).
ad::CVar echo_columns(ad::Graph& g, const EchoTensor& echoes, Eigen::Index first, Eigen::Index count);

}  // namespace tomo
