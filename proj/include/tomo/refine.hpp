#pragma once

#include "tomo/autodiff/conv.hpp"
#include "tomo/autodiff/graph.hpp"
#include "tomo/autodiff/ops.hpp"
#include "tomo/prenet.hpp"
#include "tomo/simulator.hpp"
#include "tomo/volume.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tomo {

/// AE: one (elevation x azimuth) slice per range index.
/// RE: one (elevation x range) slice per azimuth index.
enum class Orientation { azimuth_elevation, range_elevation };
enum class MergeStrategy { max, sum };

/// Index bookkeeping between a (range, azimuth, elevation) grid and a stack
/// of reflect-padded 2D slices shaped (count, 1, padded_height, padded_width).
struct SliceLayout {
    Orientation orientation = Orientation::azimuth_elevation;
    Eigen::Index ranges = 0;
    Eigen::Index azimuths = 0;
    Eigen::Index bins = 0;
    Eigen::Index multiple = 32;

    SliceLayout() = default;
    SliceLayout(Orientation o, Eigen::Index ranges, Eigen::Index azimuths, Eigen::Index bins, Eigen::Index multiple = 32);

    Eigen::Index count() const;
    Eigen::Index height() const { return bins; }
    Eigen::Index width() const;
    Eigen::Index padded_height() const;
    Eigen::Index padded_width() const;
    Eigen::Index pad_top() const { return (padded_height() - height()) / 2; }
    Eigen::Index pad_left() const { return (padded_width() - width()) / 2; }
    ad::Shape stack_shape() const;

    /// Stack <- range-major volume, offset (r * azimuths + a) * bins + l.
    ad::IndexMap from_volume() const;
    /// Stack <- elevation-major columns, offset l * (ranges * azimuths) + r * azimuths + a.
    ad::IndexMap from_columns() const;
    /// Range-major volume <- stack (crop).
    ad::IndexMap to_volume() const;
};

/// Mirror index into [0, n) without repeating the edge sample; pads wider
/// than the extent fold back and forth.
Eigen::Index reflect_index(Eigen::Index i, Eigen::Index n);

struct SliceStack {
    ad::Tensor data;
    SliceLayout layout;
};

SliceStack volume_to_slices(const ComplexVolume& volume, Orientation o, Eigen::Index multiple = 32);
SliceStack volume_to_slices(const ReflectivityVolume& volume, Orientation o, Eigen::Index multiple = 32);
ReflectivityVolume slices_to_volume(const SliceStack& stack);

struct EncDecConfig {
    /// Output channels of encoder stages 1..S; decoders mirror them.
    std::vector<Eigen::Index> channels{16, 32, 64, 128, 256};
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;
    /// Head output is added to the input slice before the final ReLU, and
    /// the head starts at zero so an untrained refiner passes its input through.
    bool residual = true;
};

/// Encoder-decoder with skip connections. Encoder stage j runs
/// [conv3x3 -> batchnorm -> ReLU] x 2 then 2x2 max pooling. The decoder stage
/// at level j upsamples with a 2x2 transposed convolution, concatenates the
/// encoder output of level j and applies the same conv pair. A 1x1 head and a
/// ReLU produce one nonnegative channel; in residual mode the head output is
/// added to the input before that ReLU.
///
/// Parameters are named `<prefix>.stage{j}.{enc,dec}.*` and `<prefix>.stage1.head.*`.
class EncoderDecoder {
public:
    EncoderDecoder(std::string prefix, EncDecConfig cfg, std::uint64_t seed);

    int stages() const { return static_cast<int>(cfg_.channels.size()); }
    Eigen::Index multiple() const { return Eigen::Index{1} << stages(); }
    const EncDecConfig& config() const { return cfg_; }

    /// x: (batch, 1, H, W) with H and W divisible by multiple().
    ad::Var forward(ad::Graph& g, const ad::Var& x, bool training);

    /// Eval-mode forward over a stack, `chunk` slices per graph.
    ad::Tensor apply(const ad::Tensor& stack, Eigen::Index chunk = 8);

    std::vector<ad::Parameter*> parameters();

private:
    struct ConvBn {
        ad::Parameter weight, bias, gamma, beta, running_mean, running_var;
    };
    struct Level {
        ConvBn enc1, enc2;
        ad::Parameter up_weight, up_bias;
        ConvBn dec1, dec2;
    };

    ConvBn make_conv_bn(const std::string& name, Eigen::Index cin, Eigen::Index cout);
    ad::Var conv_bn_relu(ad::Graph& g, ConvBn& c, const ad::Var& x, bool training);

    std::string prefix_;
    EncDecConfig cfg_;
    std::uint64_t rng_state_;
    std::vector<Level> levels_;
    ad::Parameter head_weight_, head_bias_;
};

ReflectivityVolume merge(const ReflectivityVolume& ae, const ReflectivityVolume& re,
                         MergeStrategy strategy = MergeStrategy::max);
/// Max ties route the gradient to `ae`.
ad::Var merge(const ad::Var& ae, const ad::Var& re, MergeStrategy strategy = MergeStrategy::max);

struct ModelConfig {
    int blocks = 5;
    double smoothing = 1e-8;
    std::optional<double> step;          ///< mu0; defaults to 0.9 / sigma_max(A)^2
    double theta0_per_baseline = 0.01;   ///< theta0 = this * N, an L1 weight (applied threshold mu0 * theta0)
    EncDecConfig encdec;
    MergeStrategy merge = MergeStrategy::max;
    Eigen::Index eval_chunk = 8;         ///< slices per graph in full_forward
};

/// Pre-imaging network, the AE and RE refiners (independent parameters) and
/// the merge.
class TomoModel {
public:
    TomoModel(const SteeringMatrix& A, ModelConfig cfg, std::uint64_t seed);

    PreNet& prenet() { return prenet_; }
    EncoderDecoder& ae() { return ae_; }
    EncoderDecoder& re() { return re_; }
    const ModelConfig& config() const { return cfg_; }
    std::uint64_t geometry_id() const { return geometry_id_; }

    /// Test hook: replaces both refiners with the identity.
    bool bypass_refiners = false;

    std::vector<ad::Parameter*> parameters();

    /// Differentiable forward of one scene (or crop). Returns the merged
    /// volume as a (ranges, azimuths, bins) range-major tensor.
    ad::Var forward(ad::Graph& g, const EchoTensor& echoes, bool training);

    /// Inference in eval mode with bounded memory.
    ReflectivityVolume full_forward(const EchoTensor& echoes);

private:
    ReflectivityVolume refine(EncoderDecoder& net, const ad::Tensor& columns, const SliceLayout& layout);

    ModelConfig cfg_;
    std::uint64_t geometry_id_;
    PreNet prenet_;
    EncoderDecoder ae_;
    EncoderDecoder re_;
};

EchoTensor crop_echoes(const EchoTensor& echoes, Eigen::Index r0, Eigen::Index a0, Eigen::Index ranges,
                       Eigen::Index azimuths);
ReflectivityVolume crop_volume(const ReflectivityVolume& v, Eigen::Index r0, Eigen::Index a0, Eigen::Index ranges,
                               Eigen::Index azimuths);

}  // namespace tomo
