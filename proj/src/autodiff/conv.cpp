#include "tomo/autodiff/conv.hpp"

#include "tomo/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

namespace tomo::ad {

namespace {

// Fixed partition of the batch so gradient reductions do not depend on the
// worker count.
constexpr Index kChunks = 8;

struct Range {
    Index begin, end;
};

Range chunk_range(Index n, Index c, Index chunks) { return {n * c / chunks, n * (c + 1) / chunks}; }

using RowMap = Eigen::Map<RowMatrix>;
using ConstRowMap = Eigen::Map<const RowMatrix>;

void require_rank4(const char* op, const Var& x) {
    if (x.value().rank() != 4) throw std::invalid_argument(std::string(op) + ": expected (N, C, H, W), got " + to_string(x.shape()));
}

void im2col(const double* x, Index C, Index H, Index W, int k, double* cols) {
    const int pad = k / 2;
    const Index hw = H * W;
    for (Index c = 0; c < C; ++c) {
        const double* src = x + c * hw;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                double* row = cols + ((c * k + ky) * k + kx) * hw;
                const Index dy = ky - pad;
                const Index dx = kx - pad;
                for (Index y = 0; y < H; ++y) {
                    double* dst = row + y * W;
                    const Index sy = y + dy;
                    if (sy < 0 || sy >= H) {
                        std::fill(dst, dst + W, 0.0);
                        continue;
                    }
                    const double* s = src + sy * W;
                    const Index x0 = std::max<Index>(0, -dx);
                    const Index x1 = std::min<Index>(W, W - dx);
                    std::fill(dst, dst + x0, 0.0);
                    std::copy(s + x0 + dx, s + x1 + dx, dst + x0);
                    std::fill(dst + x1, dst + W, 0.0);
                }
            }
        }
    }
}

void col2im(const double* cols, Index C, Index H, Index W, int k, double* x) {
    const int pad = k / 2;
    const Index hw = H * W;
    for (Index c = 0; c < C; ++c) {
        double* dst = x + c * hw;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const double* row = cols + ((c * k + ky) * k + kx) * hw;
                const Index dy = ky - pad;
                const Index dx = kx - pad;
                for (Index y = 0; y < H; ++y) {
                    const Index sy = y + dy;
                    if (sy < 0 || sy >= H) continue;
                    const double* s = row + y * W;
                    double* d = dst + sy * W;
                    const Index x0 = std::max<Index>(0, -dx);
                    const Index x1 = std::min<Index>(W, W - dx);
                    for (Index xx = x0; xx < x1; ++xx) d[xx + dx] += s[xx];
                }
            }
        }
    }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias) {
    require_rank4("conv2d", x);
    const Shape& xs = x.shape();
    const Shape& ws = weight.shape();
    if (ws.size() != 4 || ws[1] != xs[1] || ws[2] != ws[3] || ws[2] % 2 == 0 || bias.value().size() != ws[0]) {
        throw std::invalid_argument("conv2d: weight " + to_string(ws) + " / bias " + to_string(bias.shape()) +
                                    " incompatible with input " + to_string(xs));
    }
    const Index N = xs[0], C = xs[1], H = xs[2], W = xs[3];
    const Index Co = ws[0];
    const int k = static_cast<int>(ws[2]);
    const Index K = C * k * k;
    const Index hw = H * W;

    Tensor out({N, Co, H, W});
    const ConstRowMap wm(weight.value().data(), Co, K);
    const Eigen::Map<const Eigen::VectorXd> b(bias.value().data(), Co);
    const double* xin = x.value().data();
    double* yout = out.data();
    const Index chunks = std::min(kChunks, std::max<Index>(N, 1));
    parallel_for(chunks, [&](std::ptrdiff_t c) {
        const Range r = chunk_range(N, c, chunks);
        RowMatrix cols(k == 1 ? 0 : K, k == 1 ? 0 : hw);
        for (Index n = r.begin; n < r.end; ++n) {
            RowMap y(yout + n * Co * hw, Co, hw);
            if (k == 1) {
                y.noalias() = wm * ConstRowMap(xin + n * C * hw, C, hw);
            } else {
                im2col(xin + n * C * hw, C, H, W, k, cols.data());
                y.noalias() = wm * cols;
            }
            y.colwise() += b;
        }
    });

    return x.graph().record("conv2d", std::move(out), {x, weight, bias},
        [x, weight, bias, N, C, H, W, Co, k, K, hw, chunks](Graph& g, const Tensor&, const Tensor& go) {
            const bool need_x = g.requires_grad(x);
            const bool need_w = g.requires_grad(weight) || g.requires_grad(bias);
            const ConstRowMap wm(g.value(weight).data(), Co, K);
            const double* xin = g.value(x).data();
            double* gx = need_x ? g.grad(x).data() : nullptr;
            std::vector<RowMatrix> dw(static_cast<std::size_t>(chunks));
            std::vector<Eigen::VectorXd> db(static_cast<std::size_t>(chunks));
            parallel_for(chunks, [&](std::ptrdiff_t c) {
                const Range r = chunk_range(N, c, chunks);
                RowMatrix& dwc = dw[static_cast<std::size_t>(c)];
                Eigen::VectorXd& dbc = db[static_cast<std::size_t>(c)];
                if (need_w) {
                    dwc = RowMatrix::Zero(Co, K);
                    dbc = Eigen::VectorXd::Zero(Co);
                }
                RowMatrix cols(k == 1 ? 0 : K, k == 1 ? 0 : hw);
                RowMatrix dcols;
                for (Index n = r.begin; n < r.end; ++n) {
                    const ConstRowMap gy(go.data() + n * Co * hw, Co, hw);
                    if (need_w) {
                        if (k == 1) {
                            dwc.noalias() += gy * ConstRowMap(xin + n * C * hw, C, hw).transpose();
                        } else {
                            im2col(xin + n * C * hw, C, H, W, k, cols.data());
                            dwc.noalias() += gy * cols.transpose();
                        }
                        dbc += gy.rowwise().sum();
                    }
                    if (need_x) {
                        if (k == 1) {
                            RowMap(gx + n * C * hw, C, hw).noalias() += wm.transpose() * gy;
                        } else {
                            dcols.noalias() = wm.transpose() * gy;
                            col2im(dcols.data(), C, H, W, k, gx + n * C * hw);
                        }
                    }
                }
            });
            if (need_w) {
                for (Index c = 1; c < chunks; ++c) {
                    dw[0] += dw[static_cast<std::size_t>(c)];
                    db[0] += db[static_cast<std::size_t>(c)];
                }
                if (g.requires_grad(weight)) RowMap(g.grad(weight).data(), Co, K) += dw[0];
                if (g.requires_grad(bias)) g.grad(bias).values() += db[0].array();
            }
        });
}

Var conv_transpose2x2(const Var& x, const Var& weight, const Var& bias) {
    require_rank4("conv_transpose2x2", x);
    const Shape& xs = x.shape();
    const Shape& ws = weight.shape();
    if (ws.size() != 4 || ws[0] != xs[1] || ws[2] != 2 || ws[3] != 2 || bias.value().size() != ws[1]) {
        throw std::invalid_argument("conv_transpose2x2: weight " + to_string(ws) + " incompatible with input " +
                                    to_string(xs));
    }
    const Index N = xs[0], C = xs[1], H = xs[2], W = xs[3];
    const Index Co = ws[1];
    const Index hw = H * W;
    const Index H2 = 2 * H, W2 = 2 * W;

    Tensor out({N, Co, H2, W2});
    const ConstRowMap wm(weight.value().data(), C, Co * 4);
    const double* xin = x.value().data();
    const double* b = bias.value().data();
    double* yout = out.data();
    const Index chunks = std::min(kChunks, std::max<Index>(N, 1));
    parallel_for(chunks, [&](std::ptrdiff_t c) {
        const Range r = chunk_range(N, c, chunks);
        RowMatrix t(Co * 4, hw);
        for (Index n = r.begin; n < r.end; ++n) {
            t.noalias() = wm.transpose() * ConstRowMap(xin + n * C * hw, C, hw);
            double* y = yout + n * Co * H2 * W2;
            for (Index co = 0; co < Co; ++co) {
                for (int d = 0; d < 4; ++d) {
                    const double* trow = t.data() + (co * 4 + d) * hw;
                    const int di = d / 2, dj = d % 2;
                    for (Index i = 0; i < H; ++i) {
                        double* yrow = y + (co * H2 + 2 * i + di) * W2 + dj;
                        for (Index j = 0; j < W; ++j) yrow[2 * j] = trow[i * W + j] + b[co];
                    }
                }
            }
        }
    });

    return x.graph().record("conv_transpose2x2", std::move(out), {x, weight, bias},
        [x, weight, bias, N, C, H, W, Co, hw, H2, W2, chunks](Graph& g, const Tensor&, const Tensor& go) {
            const bool need_x = g.requires_grad(x);
            const bool need_w = g.requires_grad(weight) || g.requires_grad(bias);
            const ConstRowMap wm(g.value(weight).data(), C, Co * 4);
            const double* xin = g.value(x).data();
            double* gx = need_x ? g.grad(x).data() : nullptr;
            std::vector<RowMatrix> dw(static_cast<std::size_t>(chunks));
            std::vector<Eigen::VectorXd> db(static_cast<std::size_t>(chunks));
            parallel_for(chunks, [&](std::ptrdiff_t c) {
                const Range r = chunk_range(N, c, chunks);
                RowMatrix& dwc = dw[static_cast<std::size_t>(c)];
                Eigen::VectorXd& dbc = db[static_cast<std::size_t>(c)];
                if (need_w) {
                    dwc = RowMatrix::Zero(C, Co * 4);
                    dbc = Eigen::VectorXd::Zero(Co);
                }
                RowMatrix gt(Co * 4, hw);
                for (Index n = r.begin; n < r.end; ++n) {
                    const double* gy = go.data() + n * Co * H2 * W2;
                    for (Index co = 0; co < Co; ++co) {
                        for (int d = 0; d < 4; ++d) {
                            double* trow = gt.data() + (co * 4 + d) * hw;
                            const int di = d / 2, dj = d % 2;
                            for (Index i = 0; i < H; ++i) {
                                const double* yrow = gy + (co * H2 + 2 * i + di) * W2 + dj;
                                for (Index j = 0; j < W; ++j) trow[i * W + j] = yrow[2 * j];
                            }
                        }
                    }
                    if (need_w) {
                        dwc.noalias() += ConstRowMap(xin + n * C * hw, C, hw) * gt.transpose();
                        for (Index co = 0; co < Co; ++co) dbc[co] += gt.middleRows(co * 4, 4).sum();
                    }
                    if (need_x) RowMap(gx + n * C * hw, C, hw).noalias() += wm * gt;
                }
            });
            if (need_w) {
                for (Index c = 1; c < chunks; ++c) {
                    dw[0] += dw[static_cast<std::size_t>(c)];
                    db[0] += db[static_cast<std::size_t>(c)];
                }
                if (g.requires_grad(weight)) RowMap(g.grad(weight).data(), C, Co * 4) += dw[0];
                if (g.requires_grad(bias)) g.grad(bias).values() += db[0].array();
            }
        });
}

Var maxpool2x2(const Var& x) {
    require_rank4("maxpool2x2", x);
    const Shape& xs = x.shape();
    const Index N = xs[0], C = xs[1], H = xs[2], W = xs[3];
    if (H % 2 != 0 || W % 2 != 0) {
        throw std::invalid_argument("maxpool2x2: odd spatial size " + to_string(xs) +
                                    "; reflect-pad the input to even H and W first");
    }
    const Index Ho = H / 2, Wo = W / 2;
    Tensor out({N, C, Ho, Wo});
    auto argmax = std::make_shared<std::vector<Index>>(static_cast<std::size_t>(out.size()));
    const double* in = x.value().data();
    double* o = out.data();
    for (Index p = 0; p < N * C; ++p) {
        const Index base = p * H * W;
        for (Index i = 0; i < Ho; ++i) {
            for (Index j = 0; j < Wo; ++j) {
                Index best = base + (2 * i) * W + 2 * j;
                for (Index di = 0; di < 2; ++di) {
                    for (Index dj = 0; dj < 2; ++dj) {
                        const Index cand = base + (2 * i + di) * W + 2 * j + dj;
                        if (in[cand] > in[best]) best = cand;
                    }
                }
                const Index oi = (p * Ho + i) * Wo + j;
                o[oi] = in[best];
                (*argmax)[static_cast<std::size_t>(oi)] = best;
            }
        }
    }
    return x.graph().record("maxpool2x2", std::move(out), {x}, [x, argmax](Graph& g, const Tensor&, const Tensor& go) {
        if (!g.requires_grad(x)) return;
        double* gx = g.grad(x).data();
        for (std::size_t i = 0; i < argmax->size(); ++i) gx[(*argmax)[i]] += go[static_cast<Index>(i)];
    });
}

Var batchnorm2d(const Var& x, const Var& gamma, const Var& beta, Parameter& running_mean, Parameter& running_var,
                const BatchNormOptions& opts) {
    require_rank4("batchnorm2d", x);
    const Shape& xs = x.shape();
    const Index N = xs[0], C = xs[1], hw = xs[2] * xs[3];
    if (gamma.value().size() != C || beta.value().size() != C || running_mean.value.size() != C ||
        running_var.value.size() != C) {
        throw std::invalid_argument("batchnorm2d: parameter size does not match channels of " + to_string(xs));
    }
    const Index M = N * hw;
    if (opts.training && M < 2) throw std::invalid_argument("batchnorm2d: training needs more than one value per channel");

    Eigen::ArrayXd mu(C), inv_std(C);
    const double* in = x.value().data();
    if (opts.training) {
        for (Index c = 0; c < C; ++c) {
            double s = 0.0;
            for (Index n = 0; n < N; ++n) {
                s += Eigen::Map<const Eigen::ArrayXd>(in + (n * C + c) * hw, hw).sum();
            }
            const double m = s / static_cast<double>(M);
            double ss = 0.0;
            for (Index n = 0; n < N; ++n) {
                ss += (Eigen::Map<const Eigen::ArrayXd>(in + (n * C + c) * hw, hw) - m).square().sum();
            }
            const double var = ss / static_cast<double>(M);
            mu[c] = m;
            inv_std[c] = 1.0 / std::sqrt(var + opts.eps);
            running_mean.value[c] = (1.0 - opts.momentum) * running_mean.value[c] + opts.momentum * m;
            running_var.value[c] = (1.0 - opts.momentum) * running_var.value[c] +
                                   opts.momentum * ss / static_cast<double>(M - 1);
        }
    } else {
        mu = running_mean.value.values();
        inv_std = 1.0 / (running_var.value.values() + opts.eps).sqrt();
    }

    auto xhat = std::make_shared<Tensor>(xs);
    Tensor out(xs);
    const double* gm = gamma.value().data();
    const double* bt = beta.value().data();
    for (Index n = 0; n < N; ++n) {
        for (Index c = 0; c < C; ++c) {
            const Index off = (n * C + c) * hw;
            auto xh = Eigen::Map<Eigen::ArrayXd>(xhat->data() + off, hw);
            xh = (Eigen::Map<const Eigen::ArrayXd>(in + off, hw) - mu[c]) * inv_std[c];
            Eigen::Map<Eigen::ArrayXd>(out.data() + off, hw) = xh * gm[c] + bt[c];
        }
    }

    const bool training = opts.training;
    return x.graph().record("batchnorm2d", std::move(out), {x, gamma, beta},
        [x, gamma, beta, xhat, inv_std, N, C, hw, M, training](Graph& g, const Tensor&, const Tensor& go) {
            Eigen::ArrayXd sum_g = Eigen::ArrayXd::Zero(C), sum_gx = Eigen::ArrayXd::Zero(C);
            for (Index n = 0; n < N; ++n) {
                for (Index c = 0; c < C; ++c) {
                    const Index off = (n * C + c) * hw;
                    const auto gy = Eigen::Map<const Eigen::ArrayXd>(go.data() + off, hw);
                    sum_g[c] += gy.sum();
                    sum_gx[c] += (gy * Eigen::Map<const Eigen::ArrayXd>(xhat->data() + off, hw)).sum();
                }
            }
            if (g.requires_grad(gamma)) g.grad(gamma).values() += sum_gx;
            if (g.requires_grad(beta)) g.grad(beta).values() += sum_g;
            if (!g.requires_grad(x)) return;
            const double* gm = g.value(gamma).data();
            double* gx = g.grad(x).data();
            const double inv_m = 1.0 / static_cast<double>(M);
            for (Index n = 0; n < N; ++n) {
                for (Index c = 0; c < C; ++c) {
                    const Index off = (n * C + c) * hw;
                    const auto gy = Eigen::Map<const Eigen::ArrayXd>(go.data() + off, hw);
                    auto dx = Eigen::Map<Eigen::ArrayXd>(gx + off, hw);
                    const double k = gm[c] * inv_std[c];
                    if (training) {
                        const auto xh = Eigen::Map<const Eigen::ArrayXd>(xhat->data() + off, hw);
                        dx += k * (gy - sum_g[c] * inv_m - xh * (sum_gx[c] * inv_m));
                    } else {
                        dx += k * gy;
                    }
                }
            }
        });
}

Var concat_channels(const Var& a, const Var& b) {
    require_rank4("concat_channels", a);
    require_rank4("concat_channels", b);
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    if (as[0] != bs[0] || as[2] != bs[2] || as[3] != bs[3]) {
        throw std::invalid_argument("concat_channels: " + to_string(as) + " vs " + to_string(bs));
    }
    const Index N = as[0], Ca = as[1], Cb = bs[1], hw = as[2] * as[3];
    Tensor out({N, Ca + Cb, as[2], as[3]});
    for (Index n = 0; n < N; ++n) {
        std::copy_n(a.value().data() + n * Ca * hw, Ca * hw, out.data() + n * (Ca + Cb) * hw);
        std::copy_n(b.value().data() + n * Cb * hw, Cb * hw, out.data() + n * (Ca + Cb) * hw + Ca * hw);
    }
    return a.graph().record("concat_channels", std::move(out), {a, b},
        [a, b, N, Ca, Cb, hw](Graph& g, const Tensor&, const Tensor& go) {
            for (Index n = 0; n < N; ++n) {
                const double* src = go.data() + n * (Ca + Cb) * hw;
                if (g.requires_grad(a)) {
                    Eigen::Map<Eigen::ArrayXd>(g.grad(a).data() + n * Ca * hw, Ca * hw) +=
                        Eigen::Map<const Eigen::ArrayXd>(src, Ca * hw);
                }
                if (g.requires_grad(b)) {
                    Eigen::Map<Eigen::ArrayXd>(g.grad(b).data() + n * Cb * hw, Cb * hw) +=
                        Eigen::Map<const Eigen::ArrayXd>(src + Ca * hw, Cb * hw);
                }
            }
        });
}

}  // namespace tomo::ad
