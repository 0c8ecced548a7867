#include "tomo/refine.hpp"

#include "tomo/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace tomo {

using ad::Graph;
using ad::IndexMap;
using ad::Parameter;
using ad::Shape;
using ad::Tensor;
using ad::Var;
using Eigen::Index;

namespace {

Index round_up(Index n, Index m) { return (n + m - 1) / m * m; }

bool is_ae(Orientation o) { return o == Orientation::azimuth_elevation; }

template <typename Source>
IndexMap stack_map(const SliceLayout& s, Source source) {
    const Index ph = s.padded_height(), pw = s.padded_width();
    auto map = std::make_shared<std::vector<Index>>(static_cast<std::size_t>(s.count() * ph * pw));
    Index* out = map->data();
    for (Index k = 0; k < s.count(); ++k) {
        for (Index y = 0; y < ph; ++y) {
            const Index l = reflect_index(y - s.pad_top(), s.height());
            for (Index x = 0; x < pw; ++x) {
                const Index w = reflect_index(x - s.pad_left(), s.width());
                *out++ = is_ae(s.orientation) ? source(k, w, l) : source(w, k, l);
            }
        }
    }
    return map;
}

Tensor apply_map(const double* src, const std::vector<Index>& map, Shape shape) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < map.size(); ++i) t[static_cast<Index>(i)] = map[i] < 0 ? 0.0 : src[map[i]];
    return t;
}

}  // namespace

Index reflect_index(Index i, Index n) {
    if (n <= 1) return 0;
    const Index period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

SliceLayout::SliceLayout(Orientation o, Index r, Index a, Index l, Index m)
    : orientation(o), ranges(r), azimuths(a), bins(l), multiple(m) {
    if (r < 1 || a < 1 || l < 1) throw std::invalid_argument("SliceLayout: empty volume");
    if (m < 1) throw std::invalid_argument("SliceLayout: multiple must be >= 1");
}

Index SliceLayout::count() const { return is_ae(orientation) ? ranges : azimuths; }
Index SliceLayout::width() const { return is_ae(orientation) ? azimuths : ranges; }
Index SliceLayout::padded_height() const { return round_up(height(), multiple); }
Index SliceLayout::padded_width() const { return round_up(width(), multiple); }
Shape SliceLayout::stack_shape() const { return {count(), 1, padded_height(), padded_width()}; }

IndexMap SliceLayout::from_volume() const {
    return stack_map(*this, [this](Index r, Index a, Index l) { return (r * azimuths + a) * bins + l; });
}

IndexMap SliceLayout::from_columns() const {
    const Index cells = ranges * azimuths;
    return stack_map(*this, [this, cells](Index r, Index a, Index l) { return l * cells + r * azimuths + a; });
}

IndexMap SliceLayout::to_volume() const {
    const Index ph = padded_height(), pw = padded_width();
    auto map = std::make_shared<std::vector<Index>>(static_cast<std::size_t>(ranges * azimuths * bins));
    Index* out = map->data();
    for (Index r = 0; r < ranges; ++r) {
        for (Index a = 0; a < azimuths; ++a) {
            const Index k = is_ae(orientation) ? r : a;
            const Index w = is_ae(orientation) ? a : r;
            for (Index l = 0; l < bins; ++l) *out++ = (k * ph + l + pad_top()) * pw + w + pad_left();
        }
    }
    return map;
}

SliceStack volume_to_slices(const ReflectivityVolume& volume, Orientation o, Index multiple) {
    SliceLayout layout(o, volume.ranges(), volume.azimuths(), volume.bins(), multiple);
    return {apply_map(volume.data().data(), *layout.from_volume(), layout.stack_shape()), layout};
}

SliceStack volume_to_slices(const ComplexVolume& volume, Orientation o, Index multiple) {
    return volume_to_slices(magnitude(volume), o, multiple);
}

ReflectivityVolume slices_to_volume(const SliceStack& stack) {
    const SliceLayout& s = stack.layout;
    if (stack.data.shape() != s.stack_shape()) {
        throw std::invalid_argument("slices_to_volume: stack " + ad::to_string(stack.data.shape()) +
                                    " does not match layout " + ad::to_string(s.stack_shape()));
    }
    ReflectivityVolume v(s.ranges, s.azimuths, s.bins);
    const auto map = s.to_volume();
    for (Index i = 0; i < v.size(); ++i) v.data()[i] = stack.data[(*map)[static_cast<std::size_t>(i)]];
    return v;
}

// ---------------------------------------------------------------------------

EncoderDecoder::EncoderDecoder(std::string prefix, EncDecConfig cfg, std::uint64_t seed)
    : prefix_(std::move(prefix)), cfg_(std::move(cfg)), rng_state_(seed) {
    if (cfg_.channels.empty()) throw std::invalid_argument("EncoderDecoder: channel plan is empty");
    for (Index c : cfg_.channels) {
        if (c < 1) throw std::invalid_argument("EncoderDecoder: channel counts must be positive");
    }
    const int S = stages();
    levels_.resize(static_cast<std::size_t>(S));
    for (int j = 1; j <= S; ++j) {
        const std::string base = prefix_ + ".stage" + std::to_string(j) + ".";
        const Index cin = j == 1 ? 1 : cfg_.channels[static_cast<std::size_t>(j - 2)];
        const Index c = cfg_.channels[static_cast<std::size_t>(j - 1)];
        Level& lv = levels_[static_cast<std::size_t>(j - 1)];
        lv.enc1 = make_conv_bn(base + "enc.conv1", cin, c);
        lv.enc2 = make_conv_bn(base + "enc.conv2", c, c);
    }
    // Decoders are built deepest first so the initialization order follows the forward pass.
    for (int j = S; j >= 1; --j) {
        const std::string base = prefix_ + ".stage" + std::to_string(j) + ".";
        // Input of the level-j upsampler: the bottleneck at the deepest level, else level j + 1's decoder.
        const Index below = cfg_.channels[static_cast<std::size_t>(j < S ? j : S - 1)];
        const Index c = cfg_.channels[static_cast<std::size_t>(j - 1)];
        Level& lv = levels_[static_cast<std::size_t>(j - 1)];
        std::mt19937_64 rng(derive_seed(rng_state_, static_cast<std::uint64_t>(1000 + j)));
        const double bound = std::sqrt(6.0 / static_cast<double>(below));
        std::uniform_real_distribution<double> u(-bound, bound);
        Tensor w({below, c, 2, 2});
        for (Index i = 0; i < w.size(); ++i) w[i] = u(rng);
        lv.up_weight = Parameter(base + "dec.up.weight", std::move(w));
        lv.up_bias = Parameter(base + "dec.up.bias", Tensor({c}));
        lv.dec1 = make_conv_bn(base + "dec.conv1", 2 * c, c);
        lv.dec2 = make_conv_bn(base + "dec.conv2", c, c);
    }
    const Index c1 = cfg_.channels.front();
    std::mt19937_64 rng(derive_seed(rng_state_, 9999));
    const double bound = std::sqrt(6.0 / static_cast<double>(c1));
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor hw({1, c1, 1, 1});
    if (!cfg_.residual)
        for (Index i = 0; i < hw.size(); ++i) hw[i] = u(rng);
    head_weight_ = Parameter(prefix_ + ".stage1.head.weight", std::move(hw));
    head_bias_ = Parameter(prefix_ + ".stage1.head.bias", Tensor({1}));
}

EncoderDecoder::ConvBn EncoderDecoder::make_conv_bn(const std::string& name, Index cin, Index cout) {
    // He-uniform: U(-b, b) with b = sqrt(6 / fan_in).
    std::mt19937_64 rng(derive_seed(rng_state_, std::hash<std::string>{}(name)));
    const double bound = std::sqrt(6.0 / static_cast<double>(cin * 9));
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor w({cout, cin, 3, 3});
    for (Index i = 0; i < w.size(); ++i) w[i] = u(rng);
    ConvBn c;
    c.weight = Parameter(name + ".weight", std::move(w));
    c.bias = Parameter(name + ".bias", Tensor({cout}));
    c.gamma = Parameter(name + ".bn.gamma", Tensor({cout}, 1.0));
    c.beta = Parameter(name + ".bn.beta", Tensor({cout}));
    c.running_mean = Parameter(name + ".bn.running_mean", Tensor({cout}), false);
    c.running_var = Parameter(name + ".bn.running_var", Tensor({cout}, 1.0), false);
    return c;
}

Var EncoderDecoder::conv_bn_relu(Graph& g, ConvBn& c, const Var& x, bool training) {
    const Var y = ad::conv2d(x, g.parameter(c.weight), g.parameter(c.bias));
    const ad::BatchNormOptions opts{training, cfg_.bn_momentum, cfg_.bn_eps};
    return ad::relu(ad::batchnorm2d(y, g.parameter(c.gamma), g.parameter(c.beta), c.running_mean, c.running_var, opts));
}

Var EncoderDecoder::forward(Graph& g, const Var& x, bool training) {
    const Shape& s = x.shape();
    if (s.size() != 4 || s[1] != 1) {
        throw std::invalid_argument("encdec_forward: expected (batch, 1, H, W), got " + ad::to_string(s));
    }
    if (s[2] % multiple() != 0 || s[3] % multiple() != 0) {
        throw std::invalid_argument("encdec_forward: " + std::to_string(s[2]) + "x" + std::to_string(s[3]) +
                                    " is not divisible by " + std::to_string(multiple()) +
                                    "; reflect-pad the slices upstream");
    }
    const int S = stages();
    std::vector<Var> skips;
    Var h = x;
    for (int j = 0; j < S; ++j) {
        Level& lv = levels_[static_cast<std::size_t>(j)];
        h = conv_bn_relu(g, lv.enc1, h, training);
        h = conv_bn_relu(g, lv.enc2, h, training);
        skips.push_back(h);
        h = ad::maxpool2x2(h);
    }
    for (int j = S - 1; j >= 0; --j) {
        Level& lv = levels_[static_cast<std::size_t>(j)];
        h = ad::conv_transpose2x2(h, g.parameter(lv.up_weight), g.parameter(lv.up_bias));
        h = ad::concat_channels(h, skips[static_cast<std::size_t>(j)]);
        h = conv_bn_relu(g, lv.dec1, h, training);
        h = conv_bn_relu(g, lv.dec2, h, training);
    }
    h = ad::conv2d(h, g.parameter(head_weight_), g.parameter(head_bias_));
    return ad::relu(cfg_.residual ? ad::add(x, h) : h);
}

Tensor EncoderDecoder::apply(const Tensor& stack, Index chunk) {
    if (stack.rank() != 4) throw std::invalid_argument("EncoderDecoder::apply: expected a rank-4 stack");
    chunk = std::max<Index>(chunk, 1);
    Tensor out(stack.shape());
    const Index per = stack.dim(1) * stack.dim(2) * stack.dim(3);
    for (Index k0 = 0; k0 < stack.dim(0); k0 += chunk) {
        const Index n = std::min(chunk, stack.dim(0) - k0);
        Tensor part({n, stack.dim(1), stack.dim(2), stack.dim(3)},
                    stack.values().segment(k0 * per, n * per));
        Graph g(false);
        const Var y = forward(g, g.constant(std::move(part)), false);
        out.values().segment(k0 * per, n * per) = y.value().values();
    }
    return out;
}

std::vector<Parameter*> EncoderDecoder::parameters() {
    std::vector<Parameter*> out;
    auto add = [&out](ConvBn& c) {
        for (Parameter* p : {&c.weight, &c.bias, &c.gamma, &c.beta, &c.running_mean, &c.running_var}) out.push_back(p);
    };
    for (Level& lv : levels_) {
        add(lv.enc1);
        add(lv.enc2);
    }
    for (auto it = levels_.rbegin(); it != levels_.rend(); ++it) {
        out.push_back(&it->up_weight);
        out.push_back(&it->up_bias);
        add(it->dec1);
        add(it->dec2);
    }
    out.push_back(&head_weight_);
    out.push_back(&head_bias_);
    return out;
}

// ---------------------------------------------------------------------------

ReflectivityVolume merge(const ReflectivityVolume& ae, const ReflectivityVolume& re, MergeStrategy strategy) {
    if (!ae.same_shape(re)) {
        throw std::invalid_argument("merge: shape mismatch " + ae.shape_string() + " vs " + re.shape_string());
    }
    ReflectivityVolume out(ae.ranges(), ae.azimuths(), ae.bins());
    if (strategy == MergeStrategy::max) {
        out.data() = ae.data().max(re.data());
    } else {
        out.data() = ae.data() + re.data();
    }
    return out;
}

Var merge(const Var& ae, const Var& re, MergeStrategy strategy) {
    return strategy == MergeStrategy::max ? ad::maximum(ae, re) : ad::add(ae, re);
}

TomoModel::TomoModel(const SteeringMatrix& A, ModelConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      geometry_id_(A.geometry_id),
      prenet_(1, 1, 1),
      ae_("ae", cfg_.encdec, derive_seed(seed, 1)),
      re_("re", cfg_.encdec, derive_seed(seed, 2)) {
    const double step = cfg_.step ? *cfg_.step : default_step(A.entries);
    const double theta0 = cfg_.theta0_per_baseline * static_cast<double>(A.entries.rows());
    prenet_ = prenet_init_from_geometry(A, step, step * theta0, cfg_.blocks);
    prenet_.smoothing = cfg_.smoothing;
}

std::vector<Parameter*> TomoModel::parameters() {
    std::vector<Parameter*> out = prenet_.parameters();
    for (auto* p : ae_.parameters()) out.push_back(p);
    for (auto* p : re_.parameters()) out.push_back(p);
    return out;
}

Var TomoModel::forward(Graph& g, const EchoTensor& echoes, bool training) {
    const Index R = echoes.ranges, Az = echoes.azimuths, L = prenet_.bins();
    const Var mag = ad::magnitude(prenet_.forward(g, echo_columns(g, echoes, 0, R * Az)));
    auto branch = [&](EncoderDecoder& net, Orientation o) {
        const SliceLayout layout(o, R, Az, L, net.multiple());
        Var stack = ad::gather(mag, layout.from_columns(), layout.stack_shape());
        if (!bypass_refiners) stack = net.forward(g, stack, training);
        return ad::gather(stack, layout.to_volume(), {R, Az, L});
    };
    const Var ae = branch(ae_, Orientation::azimuth_elevation);
    const Var re = branch(re_, Orientation::range_elevation);
    return merge(ae, re, cfg_.merge);
}

ReflectivityVolume TomoModel::refine(EncoderDecoder& net, const Tensor& columns, const SliceLayout& layout) {
    SliceStack stack{apply_map(columns.data(), *layout.from_columns(), layout.stack_shape()), layout};
    if (!bypass_refiners) stack.data = net.apply(stack.data, cfg_.eval_chunk);
    return slices_to_volume(stack);
}

ReflectivityVolume TomoModel::full_forward(const EchoTensor& echoes) {
    if (echoes.baselines() != prenet_.baselines()) {
        throw std::invalid_argument("full_forward: echoes carry " + std::to_string(echoes.baselines()) +
                                    " baselines, model expects " + std::to_string(prenet_.baselines()));
    }
    const Index R = echoes.ranges, Az = echoes.azimuths, L = prenet_.bins();
    const ComplexVolume pre = pre_image_volume(echoes, prenet_);
    Tensor columns({L, R * Az});
    for (Index r = 0; r < R; ++r) {
        for (Index a = 0; a < Az; ++a) {
            for (Index l = 0; l < L; ++l) columns[l * R * Az + r * Az + a] = std::abs(pre(r, a, l));
        }
    }
    const ReflectivityVolume ae = refine(ae_, columns, SliceLayout(Orientation::azimuth_elevation, R, Az, L, ae_.multiple()));
    const ReflectivityVolume re = refine(re_, columns, SliceLayout(Orientation::range_elevation, R, Az, L, re_.multiple()));
    return merge(ae, re, cfg_.merge);
}

EchoTensor crop_echoes(const EchoTensor& echoes, Index r0, Index a0, Index ranges, Index azimuths) {
    if (r0 < 0 || a0 < 0 || r0 + ranges > echoes.ranges || a0 + azimuths > echoes.azimuths || ranges < 1 || azimuths < 1) {
        throw std::invalid_argument("crop_echoes: window outside the grid");
    }
    EchoTensor out = echoes;
    out.ranges = ranges;
    out.azimuths = azimuths;
    out.data.resize(echoes.baselines(), ranges * azimuths);
    for (Index r = 0; r < ranges; ++r) {
        out.data.middleCols(r * azimuths, azimuths) = echoes.data.middleCols(echoes.cell(r0 + r, a0), azimuths);
    }
    return out;
}

ReflectivityVolume crop_volume(const ReflectivityVolume& v, Index r0, Index a0, Index ranges, Index azimuths) {
    if (r0 < 0 || a0 < 0 || r0 + ranges > v.ranges() || a0 + azimuths > v.azimuths() || ranges < 1 || azimuths < 1) {
        throw std::invalid_argument("crop_volume: window outside the grid");
    }
    ReflectivityVolume out(ranges, azimuths, v.bins());
    for (Index r = 0; r < ranges; ++r) {
        for (Index a = 0; a < azimuths; ++a) out.column(r, a) = v.column(r0 + r, a0 + a);
    }
    return out;
}

}  // namespace tomo
