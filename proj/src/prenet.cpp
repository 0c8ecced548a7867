#include "tomo/prenet.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace tomo {

using ad::CVar;
using ad::Graph;
using ad::Parameter;
using ad::Tensor;
using ad::Var;
using Eigen::Index;

namespace {

Tensor complex_to_planes(const Eigen::MatrixXcd& m) {
    Tensor t({2, m.rows(), m.cols()});
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            t[i * m.cols() + j] = m(i, j).real();
            t[m.size() + i * m.cols() + j] = m(i, j).imag();
        }
    }
    return t;
}

Eigen::MatrixXcd planes_to_complex(const Tensor& t) {
    const Index rows = t.dim(1), cols = t.dim(2);
    Eigen::MatrixXcd m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) m(i, j) = {t[i * cols + j], t[rows * cols + i * cols + j]};
    }
    return m;
}

double softplus_inverse(double theta) {
    if (theta <= 0.0) return -700.0;
    if (theta > 30.0) return theta;
    return std::log(std::expm1(theta));
}

ad::IndexMap plane_map(Index rows, Index cols, int plane) {
    auto m = std::make_shared<std::vector<Index>>(static_cast<std::size_t>(rows * cols));
    std::iota(m->begin(), m->end(), plane * rows * cols);
    return m;
}

CVar bind_complex(Graph& g, Parameter& p) {
    const Index rows = p.value.dim(1), cols = p.value.dim(2);
    Var all = g.parameter(p);
    return {ad::gather(all, plane_map(rows, cols, 0), {rows, cols}),
            ad::gather(all, plane_map(rows, cols, 1), {rows, cols})};
}

}  // namespace

PreNet::PreNet(Index baselines, Index bins, int blocks) : baselines_(baselines), bins_(bins) {
    if (blocks < 1) throw std::invalid_argument("PreNet: need at least one block");
    if (baselines < 1 || bins < 1) throw std::invalid_argument("PreNet: empty dimensions");
    for (int k = 1; k <= blocks; ++k) {
        const std::string base = "prenet.block" + std::to_string(k) + ".";
        blocks_.push_back(Block{Parameter(base + "W1", Tensor({2, bins, baselines})),
                                Parameter(base + "W2", Tensor({2, bins, bins})),
                                Parameter(base + "theta", Tensor({1}, softplus_inverse(0.0)))});
    }
}

Eigen::MatrixXcd PreNet::w1(int k) const { return planes_to_complex(blocks_.at(k).w1.value); }
Eigen::MatrixXcd PreNet::w2(int k) const { return planes_to_complex(blocks_.at(k).w2.value); }

double PreNet::threshold(int k) const {
    const double raw = blocks_.at(k).theta.value[0];
    return std::max(raw, 0.0) + std::log1p(std::exp(-std::abs(raw)));
}

void PreNet::set_w1(int k, const Eigen::MatrixXcd& w) {
    if (w.rows() != bins_ || w.cols() != baselines_) throw std::invalid_argument("PreNet::set_w1: shape mismatch");
    blocks_.at(k).w1.value = complex_to_planes(w);
}

void PreNet::set_w2(int k, const Eigen::MatrixXcd& w) {
    if (w.rows() != bins_ || w.cols() != bins_) throw std::invalid_argument("PreNet::set_w2: shape mismatch");
    blocks_.at(k).w2.value = complex_to_planes(w);
}

void PreNet::set_threshold(int k, double theta) {
    if (theta < 0.0) throw std::invalid_argument("PreNet: threshold must be >= 0");
    blocks_.at(k).theta.value[0] = softplus_inverse(theta);
}

std::vector<Parameter*> PreNet::parameters() {
    std::vector<Parameter*> out;
    for (auto& b : blocks_) {
        out.push_back(&b.w1);
        out.push_back(&b.w2);
        out.push_back(&b.theta);
    }
    return out;
}

Index PreNet::parameter_count() const {
    Index n = 0;
    for (const auto& b : blocks_) n += b.w1.value.size() + b.w2.value.size() + b.theta.value.size();
    return n;
}

CVar PreNet::forward(Graph& g, const CVar& G) {
    if (G.re.value().rank() != 2 || G.re.shape()[0] != baselines_) {
        throw std::invalid_argument("PreNet: echo slice shape " + ad::to_string(G.re.shape()) + " does not match " +
                                    std::to_string(baselines_) + " baselines");
    }
    CVar gamma{};
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
        Block& b = blocks_[k];
        CVar z = ad::complex_matmul(bind_complex(g, b.w1), G);
        if (k > 0) z = ad::complex_add(z, ad::complex_matmul(bind_complex(g, b.w2), gamma));
        const Var theta = ad::softplus(g.parameter(b.theta));
        try {
            gamma = ad::complex_soft_threshold(z, theta, smoothing);
        } catch (const ad::NonFiniteError& e) {
            throw ad::NonFiniteError("prenet block " + std::to_string(k + 1) + ": " + e.what());
        }
    }
    return gamma;
}

PreNet prenet_init_from_geometry(const SteeringMatrix& A, double step, double theta, int blocks) {
    if (!(step > 0.0) || theta < 0.0) throw std::invalid_argument("prenet init: step must be > 0 and theta >= 0");
    const Eigen::MatrixXcd& a = A.entries;
    PreNet net(a.rows(), a.cols(), blocks);
    const Eigen::MatrixXcd w1 = step * a.adjoint();
    const Eigen::MatrixXcd w2 = Eigen::MatrixXcd::Identity(a.cols(), a.cols()) - step * (a.adjoint() * a);
    for (int k = 0; k < blocks; ++k) {
        net.set_w1(k, w1);
        net.set_w2(k, w2);
        net.set_threshold(k, theta);
    }
    return net;
}

CVar echo_columns(Graph& g, const EchoTensor& echoes, Index first, Index count) {
    const Index n = echoes.baselines();
    Tensor re({n, count}), im({n, count});
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < count; ++j) {
            const auto z = echoes.data(i, first + j);
            re[i * count + j] = z.real();
            im[i * count + j] = z.imag();
        }
    }
    return {g.constant(std::move(re)), g.constant(std::move(im))};
}

Eigen::MatrixXcd prenet_forward(const Eigen::MatrixXcd& G, PreNet& net) {
    Graph g(false);
    Tensor re({G.rows(), G.cols()}), im({G.rows(), G.cols()});
    for (Index i = 0; i < G.rows(); ++i) {
        for (Index j = 0; j < G.cols(); ++j) {
            re[i * G.cols() + j] = G(i, j).real();
            im[i * G.cols() + j] = G(i, j).imag();
        }
    }
    const CVar out = net.forward(g, {g.constant(std::move(re)), g.constant(std::move(im))});
    const Index L = out.re.shape()[0], M = out.re.shape()[1];
    Eigen::MatrixXcd res(L, M);
    for (Index i = 0; i < L; ++i) {
        for (Index j = 0; j < M; ++j) res(i, j) = {out.re.value()[i * M + j], out.im.value()[i * M + j]};
    }
    return res;
}

ComplexVolume pre_image_volume(const EchoTensor& echoes, PreNet& net) {
    const Index az = echoes.azimuths;
    ComplexVolume vol(echoes.ranges, az, net.bins());
    // A few range slices per graph keeps memory flat.
    constexpr Index kSlicesPerPass = 16;
    for (Index r0 = 0; r0 < echoes.ranges; r0 += kSlicesPerPass) {
        const Index nr = std::min(kSlicesPerPass, echoes.ranges - r0);
        Graph g(false);
        const CVar out = net.forward(g, echo_columns(g, echoes, r0 * az, nr * az));
        const Index cols = nr * az;
        for (Index l = 0; l < net.bins(); ++l) {
            for (Index j = 0; j < cols; ++j) {
                vol(r0 + j / az, j % az, l) = {out.re.value()[l * cols + j], out.im.value()[l * cols + j]};
            }
        }
    }
    return vol;
}

}  // namespace tomo
