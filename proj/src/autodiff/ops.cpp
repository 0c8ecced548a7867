#include "tomo/autodiff/ops.hpp"

#include <cmath>
#include <stdexcept>

namespace tomo::ad {

namespace {

void require_same_shape(const char* op, const Var& a, const Var& b) {
    if (&a.graph() != &b.graph()) throw std::logic_error(std::string(op) + ": operands on different graphs");
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                                    to_string(b.shape()));
    }
}

void accumulate(Graph& g, const Var& v, const Eigen::ArrayXd& delta) {
    if (g.requires_grad(v)) g.grad(v).values() += delta;
}

}  // namespace

Var add(const Var& a, const Var& b) {
    require_same_shape("add", a, b);
    Tensor out(a.shape(), a.value().values() + b.value().values());
    return a.graph().record("add", std::move(out), {a, b}, [a, b](Graph& g, const Tensor&, const Tensor& go) {
        accumulate(g, a, go.values());
        accumulate(g, b, go.values());
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape("sub", a, b);
    Tensor out(a.shape(), a.value().values() - b.value().values());
    return a.graph().record("sub", std::move(out), {a, b}, [a, b](Graph& g, const Tensor&, const Tensor& go) {
        accumulate(g, a, go.values());
        accumulate(g, b, -go.values());
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape("mul", a, b);
    Tensor out(a.shape(), a.value().values() * b.value().values());
    return a.graph().record("mul", std::move(out), {a, b}, [a, b](Graph& g, const Tensor&, const Tensor& go) {
        accumulate(g, a, go.values() * g.value(b).values());
        accumulate(g, b, go.values() * g.value(a).values());
    });
}

Var scale(const Var& a, double c) {
    Tensor out(a.shape(), a.value().values() * c);
    return a.graph().record("scale", std::move(out), {a}, [a, c](Graph& g, const Tensor&, const Tensor& go) {
        accumulate(g, a, go.values() * c);
    });
}

Var relu(const Var& a) {
    Tensor out(a.shape(), a.value().values().max(0.0));
    return a.graph().record("relu", std::move(out), {a}, [a](Graph& g, const Tensor& y, const Tensor& go) {
        accumulate(g, a, (y.values() > 0.0).select(go.values(), 0.0));
    });
}

Var softplus(const Var& a) {
    const Eigen::ArrayXd& x = a.value().values();
    // max(x, 0) + log1p(exp(-|x|)) is stable for large |x|.
    Tensor out(a.shape(), x.max(0.0) + (-x.abs()).exp().log1p());
    return a.graph().record("softplus", std::move(out), {a}, [a](Graph& g, const Tensor&, const Tensor& go) {
        const Eigen::ArrayXd& xv = g.value(a).values();
        const Eigen::ArrayXd sig = 1.0 / (1.0 + (-xv).exp());
        accumulate(g, a, go.values() * sig);
    });
}

Var maximum(const Var& a, const Var& b) {
    require_same_shape("maximum", a, b);
    const auto& x = a.value().values();
    const auto& y = b.value().values();
    Tensor out(a.shape(), x.max(y));
    return a.graph().record("maximum", std::move(out), {a, b}, [a, b](Graph& g, const Tensor&, const Tensor& go) {
        const auto pick_a = g.value(a).values() >= g.value(b).values();
        accumulate(g, a, pick_a.select(go.values(), 0.0));
        accumulate(g, b, pick_a.select(0.0, go.values()));
    });
}

Var sum(const Var& a) {
    return a.graph().record("sum", Tensor::scalar(a.value().values().sum()), {a},
                            [a](Graph& g, const Tensor&, const Tensor& go) {
                                accumulate(g, a, Eigen::ArrayXd::Constant(g.value(a).size(), go.item()));
                            });
}

Var mean(const Var& a) {
    const double n = static_cast<double>(a.value().size());
    if (n == 0) throw std::invalid_argument("mean of empty tensor");
    return a.graph().record("mean", Tensor::scalar(a.value().values().sum() / n), {a},
                            [a, n](Graph& g, const Tensor&, const Tensor& go) {
                                accumulate(g, a, Eigen::ArrayXd::Constant(g.value(a).size(), go.item() / n));
                            });
}

Var mse(const Var& a, const Var& b) {
    require_same_shape("mse", a, b);
    const double n = static_cast<double>(a.value().size());
    if (n == 0) throw std::invalid_argument("mse of empty tensor");
    const double v = (a.value().values() - b.value().values()).square().sum() / n;
    return a.graph().record("mse", Tensor::scalar(v), {a, b}, [a, b, n](Graph& g, const Tensor&, const Tensor& go) {
        const Eigen::ArrayXd d = (g.value(a).values() - g.value(b).values()) * (2.0 * go.item() / n);
        accumulate(g, a, d);
        accumulate(g, b, -d);
    });
}

Var mean_abs(const Var& a) {
    const double n = static_cast<double>(a.value().size());
    if (n == 0) throw std::invalid_argument("mean_abs of empty tensor");
    return a.graph().record("mean_abs", Tensor::scalar(a.value().values().abs().sum() / n), {a},
                            [a, n](Graph& g, const Tensor&, const Tensor& go) {
                                const auto& x = g.value(a).values();
                                accumulate(g, a, x.sign() * (go.item() / n));
                            });
}

Var dot_const(const Var& a, const Tensor& w) {
    if (w.size() != a.value().size()) throw std::invalid_argument("dot_const: size mismatch");
    return a.graph().record("dot_const", Tensor::scalar((a.value().values() * w.values()).sum()), {a},
                            [a, w](Graph& g, const Tensor&, const Tensor& go) {
                                accumulate(g, a, w.values() * go.item());
                            });
}

Var matmul(const Var& a, const Var& b) {
    if (a.value().rank() != 2 || b.value().rank() != 2 || a.shape()[1] != b.shape()[0]) {
        throw std::invalid_argument("matmul: incompatible shapes " + to_string(a.shape()) + " and " +
                                    to_string(b.shape()));
    }
    Tensor out({a.shape()[0], b.shape()[1]});
    out.matrix().noalias() = a.value().matrix() * b.value().matrix();
    return a.graph().record("matmul", std::move(out), {a, b}, [a, b](Graph& g, const Tensor&, const Tensor& go) {
        if (g.requires_grad(a)) g.grad(a).matrix().noalias() += go.matrix() * g.value(b).matrix().transpose();
        if (g.requires_grad(b)) g.grad(b).matrix().noalias() += g.value(a).matrix().transpose() * go.matrix();
    });
}

Var gather(const Var& a, IndexMap map, Shape out_shape) {
    if (!map || static_cast<Index>(map->size()) != element_count(out_shape)) {
        throw std::invalid_argument("gather: index map does not match output shape " + to_string(out_shape));
    }
    const Index n_in = a.value().size();
    const double* src = a.value().data();
    Tensor out(std::move(out_shape));
    double* dst = out.data();
    const auto& idx = *map;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const Index j = idx[i];
        if (j >= n_in) throw std::out_of_range("gather: source index out of range");
        dst[i] = j >= 0 ? src[j] : 0.0;
    }
    return a.graph().record("gather", std::move(out), {a}, [a, map](Graph& g, const Tensor&, const Tensor& go) {
        if (!g.requires_grad(a)) return;
        double* ga = g.grad(a).data();
        const double* gp = go.data();
        const auto& ix = *map;
        for (std::size_t i = 0; i < ix.size(); ++i) {
            if (ix[i] >= 0) ga[ix[i]] += gp[i];
        }
    });
}

CVar complex_add(const CVar& a, const CVar& b) { return {add(a.re, b.re), add(a.im, b.im)}; }

CVar complex_matmul(const CVar& w, const CVar& x) {
    return {sub(matmul(w.re, x.re), matmul(w.im, x.im)), add(matmul(w.re, x.im), matmul(w.im, x.re))};
}

CVar complex_soft_threshold(const CVar& z, const Var& theta, double eps) {
    require_same_shape("complex_soft_threshold", z.re, z.im);
    if (theta.value().size() != 1) throw std::invalid_argument("complex_soft_threshold: theta must be a scalar");
    if (eps < 0.0) throw std::invalid_argument("complex_soft_threshold: eps must be >= 0");
    const double th = theta.value().item();
    const Eigen::ArrayXd& r = z.re.value().values();
    const Eigen::ArrayXd& i = z.im.value().values();
    const Eigen::ArrayXd m = (r.square() + i.square() + eps).sqrt();
    // Scale factor max(m - theta, 0) / m, zero wherever m <= theta.
    auto factor = std::make_shared<Eigen::ArrayXd>((m > th).select((m - th) / m.max(1e-300), 0.0));
    Tensor out_r(z.re.shape(), r * *factor);
    Tensor out_i(z.re.shape(), i * *factor);

    Graph& g = z.re.graph();
    // Two outputs share one backward: the later-recorded real part runs first,
    // stashes its gradient and forces the imaginary node to be visited, whose
    // backward then applies the joint Jacobian.
    auto gr_buf = std::make_shared<Tensor>();
    Var vi = g.record(
        "complex_soft_threshold", std::move(out_i), {z.re, z.im, theta},
        [zr = z.re, zi = z.im, theta, factor, gr_buf, eps](Graph& gg, const Tensor&, const Tensor& go) {
            const Eigen::ArrayXd& rv = gg.value(zr).values();
            const Eigen::ArrayXd& iv = gg.value(zi).values();
            const double t = gg.value(theta).item();
            const Eigen::ArrayXd mv = (rv.square() + iv.square() + eps).sqrt();
            const Eigen::ArrayXd gim = go.values();
            const Eigen::ArrayXd gre = gr_buf->empty() ? Eigen::ArrayXd::Zero(gim.size()) : gr_buf->values();
            const auto active = mv > t;
            const Eigen::ArrayXd proj = gre * rv + gim * iv;
            const Eigen::ArrayXd safe_m = mv.max(1e-300);
            const Eigen::ArrayXd common = active.select(t * proj / safe_m.cube(), 0.0);
            accumulate(gg, zr, gre * *factor + rv * common);
            accumulate(gg, zi, gim * *factor + iv * common);
            if (gg.requires_grad(theta)) gg.grad(theta)[0] += active.select(-proj / safe_m, 0.0).sum();
        });
    Var vr = g.record("complex_soft_threshold.re", std::move(out_r), {vi},
                      [gr_buf, vi](Graph& gg, const Tensor&, const Tensor& go) {
                          *gr_buf = go;
                          gg.grad(vi);
                      });
    return {vr, vi};
}

Var magnitude(const CVar& z) {
    require_same_shape("magnitude", z.re, z.im);
    const Eigen::ArrayXd m = (z.re.value().values().square() + z.im.value().values().square()).sqrt();
    Tensor out(z.re.shape(), m);
    return z.re.graph().record("magnitude", std::move(out), {z.re, z.im},
                               [zr = z.re, zi = z.im](Graph& g, const Tensor& y, const Tensor& go) {
                                   const auto& mv = y.values();
                                   const Eigen::ArrayXd w = (mv > 0.0).select(go.values() / mv.max(1e-300), 0.0);
                                   accumulate(g, zr, w * g.value(zr).values());
                                   accumulate(g, zi, w * g.value(zi).values());
                               });
}

}  // namespace tomo::ad
