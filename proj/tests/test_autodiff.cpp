#include "tomo/autodiff/adam.hpp"
#include "tomo/autodiff/checkpoint.hpp"
#include "tomo/autodiff/conv.hpp"
#include "tomo/autodiff/gradcheck.hpp"
#include "tomo/autodiff/ops.hpp"
#include "tomo/dataset.hpp"

#include "test_util.hpp"

#include <fstream>
#include <random>

using namespace tomo::ad;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(lo, hi);
    Tensor t(std::move(shape));
    for (Index i = 0; i < t.size(); ++i) t[i] = d(rng);
    return t;
}

Parameter param(const std::string& name, Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    return Parameter(name, random_tensor(std::move(shape), seed, lo, hi));
}

void expect_gradients(const std::function<Var(Graph&)>& fn, const std::vector<Parameter*>& params,
                      double tol = 1e-4) {
    const GradCheckReport rep = grad_check(fn, params);
    for (const auto& e : rep.entries) EXPECT_LT(e.max_rel_error, tol) << e.name << " index " << e.worst_index;
}

}  // namespace

TEST(Tensor, ShapesAndReshape) {
    Tensor t({2, 3}, 1.5);
    EXPECT_EQ(t.size(), 6);
    EXPECT_EQ(to_string(t.shape()), "(2, 3)");
    EXPECT_THROW(t.reshaped({4}), std::invalid_argument);
    EXPECT_EQ(t.reshaped({3, 2}).dim(0), 3);
    EXPECT_THROW(t.item(), std::logic_error);
}

TEST(GradCheck, LinearMapIsExact) {
    Parameter x = param("x", {4, 1}, 1);
    const Tensor W = random_tensor({3, 4}, 2);
    const auto rep = grad_check([&](Graph& g) { return matmul(g.constant(W), g.parameter(x)); }, {&x});
    EXPECT_LT(rep.max_rel_error(), 1e-9);
}

TEST(GradCheck, ElementwiseOps) {
    Parameter a = param("a", {3, 4}, 3), b = param("b", {3, 4}, 4);
    expect_gradients([&](Graph& g) { return g.parameter(a) + g.parameter(b); }, {&a, &b});
    expect_gradients([&](Graph& g) { return g.parameter(a) - g.parameter(b); }, {&a, &b});
    expect_gradients([&](Graph& g) { return g.parameter(a) * g.parameter(b); }, {&a, &b});
    expect_gradients([&](Graph& g) { return 2.5 * g.parameter(a); }, {&a});
    expect_gradients([&](Graph& g) { return relu(g.parameter(a)); }, {&a});
    expect_gradients([&](Graph& g) { return softplus(g.parameter(a)); }, {&a});
    expect_gradients([&](Graph& g) { return maximum(g.parameter(a), g.parameter(b)); }, {&a, &b});
}

TEST(GradCheck, Reductions) {
    Parameter a = param("a", {2, 5}, 5), b = param("b", {2, 5}, 6);
    expect_gradients([&](Graph& g) { return sum(g.parameter(a)); }, {&a});
    expect_gradients([&](Graph& g) { return mean(g.parameter(a)); }, {&a});
    expect_gradients([&](Graph& g) { return mse(g.parameter(a), g.parameter(b)); }, {&a, &b});
    expect_gradients([&](Graph& g) { return mean_abs(g.parameter(a)); }, {&a});
    const Tensor w = random_tensor({2, 5}, 7);
    expect_gradients([&](Graph& g) { return dot_const(g.parameter(a), w); }, {&a});
}

TEST(GradCheck, MatmulAndGather) {
    Parameter a = param("a", {3, 4}, 8), b = param("b", {4, 2}, 9);
    expect_gradients([&](Graph& g) { return matmul(g.parameter(a), g.parameter(b)); }, {&a, &b});
    // Transpose with a duplicated source and a zero entry.
    auto map = std::make_shared<std::vector<Index>>(std::vector<Index>{0, 4, 8, 1, 5, 9, 2, 6, 10, 3, 7, 11, 0, -1});
    expect_gradients([&](Graph& g) { return gather(g.parameter(a), map, {14}); }, {&a});
    EXPECT_THROW(
        {
            Graph g;
            gather(g.parameter(a), map, {13});
        },
        std::invalid_argument);
}

TEST(GradCheck, ComplexOps) {
    Parameter wr = param("wr", {2, 3}, 10), wi = param("wi", {2, 3}, 11);
    Parameter xr = param("xr", {3, 2}, 12), xi = param("xi", {3, 2}, 13);
    Parameter yr = param("yr", {2, 2}, 14), yi = param("yi", {2, 2}, 15);
    Parameter theta = Parameter("theta", Tensor({}, Eigen::ArrayXd::Constant(1, 0.3)));
    auto cm = [&](Graph& g) {
        return complex_matmul({g.parameter(wr), g.parameter(wi)}, {g.parameter(xr), g.parameter(xi)});
    };
    expect_gradients([&](Graph& g) { return cm(g).re; }, {&wr, &wi, &xr, &xi});
    expect_gradients([&](Graph& g) { return cm(g).im; }, {&wr, &wi, &xr, &xi});
    expect_gradients([&](Graph& g) { return complex_add(cm(g), {g.parameter(yr), g.parameter(yi)}).im; },
                     {&yr, &yi, &wr});
    auto st = [&](Graph& g) {
        return complex_soft_threshold({g.parameter(yr), g.parameter(yi)}, g.parameter(theta), 1e-8);
    };
    expect_gradients([&](Graph& g) { return st(g).re; }, {&yr, &yi, &theta});
    expect_gradients([&](Graph& g) { return st(g).im; }, {&yr, &yi, &theta});
    expect_gradients([&](Graph& g) { return magnitude({g.parameter(yr), g.parameter(yi)}); }, {&yr, &yi});
}

TEST(ComplexMatmul, MatchesRealExpansion) {
    const Tensor ar = random_tensor({2, 3}, 20), ai = random_tensor({2, 3}, 21);
    const Tensor xr = random_tensor({3, 1}, 22), xi = random_tensor({3, 1}, 23);
    Graph g(false);
    const CVar out = complex_matmul({g.constant(ar), g.constant(ai)}, {g.constant(xr), g.constant(xi)});
    for (Index r = 0; r < 2; ++r) {
        double re = 0, im = 0;
        for (Index k = 0; k < 3; ++k) {
            re += ar[r * 3 + k] * xr[k] - ai[r * 3 + k] * xi[k];
            im += ar[r * 3 + k] * xi[k] + ai[r * 3 + k] * xr[k];
        }
        EXPECT_NEAR(out.re.value()[r], re, 1e-15);
        EXPECT_NEAR(out.im.value()[r], im, 1e-15);
    }
}

TEST(SoftThresholdOp, ZeroThresholdTinyEpsIsIdentity) {
    const Tensor zr = random_tensor({20}, 30), zi = random_tensor({20}, 31);
    Graph g(false);
    const CVar out = complex_soft_threshold({g.constant(zr), g.constant(zi)}, g.constant(Tensor::scalar(0.0)), 1e-12);
    for (Index i = 0; i < 20; ++i) {
        const double mag = std::hypot(zr[i], zi[i]);
        EXPECT_LT(std::hypot(out.re.value()[i] - zr[i], out.im.value()[i] - zi[i]), 1e-6 * mag);
    }
}

TEST(SoftThresholdOp, GradientBoundedAcrossTheKink) {
    const double theta = 0.5;
    for (int i = -20; i <= 20; ++i) {
        const double m = theta + i * 1e-9;
        Parameter zr("zr", Tensor({1}, Eigen::ArrayXd::Constant(1, m)));
        Parameter zi("zi", Tensor({1}, 0.0));
        Graph g;
        const CVar out = complex_soft_threshold({g.parameter(zr), g.parameter(zi)}, g.constant(Tensor::scalar(theta)), 1e-8);
        g.backward(sum(out.re));
        EXPECT_TRUE(std::isfinite(zr.grad[0]));
        EXPECT_LE(std::abs(zr.grad[0]), 1.0 + 1e-6);
    }
}

TEST(Conv, IdentityKernelReproducesInput) {
    const Tensor x = random_tensor({1, 1, 5, 6}, 40);
    Tensor w({1, 1, 3, 3});
    w[4] = 1.0;
    Graph g(false);
    const Var y = conv2d(g.constant(x), g.constant(w), g.constant(Tensor({1})));
    EXPECT_TRUE((y.value().values() == x.values()).all());
}

TEST(Conv, Gradients) {
    Parameter x = param("x", {2, 2, 4, 4}, 41), w = param("w", {3, 2, 3, 3}, 42), b = param("b", {3}, 43);
    expect_gradients([&](Graph& g) { return conv2d(g.parameter(x), g.parameter(w), g.parameter(b)); }, {&x, &w, &b});
    Parameter wt = param("wt", {2, 3, 2, 2}, 44), bt = param("bt", {3}, 45);
    expect_gradients([&](Graph& g) { return conv_transpose2x2(g.parameter(x), g.parameter(wt), g.parameter(bt)); },
                     {&x, &wt, &bt});
    Parameter y = param("y", {2, 1, 4, 4}, 46);
    expect_gradients([&](Graph& g) { return concat_channels(g.parameter(x), g.parameter(y)); }, {&x, &y});
    expect_gradients([&](Graph& g) { return maxpool2x2(g.parameter(x)); }, {&x});
}

TEST(MaxPool, ConstantInputAndArgmaxRouting) {
    Parameter x("x", Tensor({1, 1, 4, 4}, 2.0));
    Graph g;
    const Var y = maxpool2x2(g.parameter(x));
    EXPECT_EQ(to_string(y.shape()), "(1, 1, 2, 2)");
    EXPECT_TRUE((y.value().values() == 2.0).all());
    g.backward(sum(y));
    // Each window routes its gradient to exactly one saved argmax.
    EXPECT_DOUBLE_EQ(x.grad.values().sum(), 4.0);
    EXPECT_EQ((x.grad.values() != 0.0).count(), 4);
}

TEST(MaxPool, OddSizeAsksForPadding) {
    Graph g(false);
    try {
        maxpool2x2(g.constant(Tensor({1, 1, 5, 4})));
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("pad"), std::string::npos) << e.what();
    }
}

TEST(BatchNorm, TrainingStatistics) {
    const Tensor x = random_tensor({4, 3, 5, 5}, 50, -3.0, 7.0);
    Parameter rm("rm", Tensor({3}), false), rv("rv", Tensor({3}, 1.0), false);
    Graph g(false);
    const Var y = batchnorm2d(g.constant(x), g.constant(Tensor({3}, 1.0)), g.constant(Tensor({3})), rm, rv, {});
    const Tensor& v = y.value();
    for (Index c = 0; c < 3; ++c) {
        double s = 0, s2 = 0;
        int n = 0;
        for (Index b = 0; b < 4; ++b)
            for (Index i = 0; i < 25; ++i) {
                const double e = v[(b * 3 + c) * 25 + i];
                s += e;
                s2 += e * e;
                ++n;
            }
        const double m = s / n;
        EXPECT_LT(std::abs(m), 1e-6);
        EXPECT_NEAR(s2 / n - m * m, 1.0, 1e-4);
    }
    EXPECT_GT(rm.value.values().abs().sum(), 0.0);
}

TEST(BatchNorm, Gradients) {
    Parameter x = param("x", {3, 2, 2, 2}, 51), gamma = param("gamma", {2}, 52, 0.5, 1.5), beta = param("beta", {2}, 53);
    Parameter rm("rm", Tensor({2}), false), rv("rv", Tensor({2}, 1.0), false);
    expect_gradients(
        [&](Graph& g) { return batchnorm2d(g.parameter(x), g.parameter(gamma), g.parameter(beta), rm, rv, {}); },
        {&x, &gamma, &beta});
    BatchNormOptions eval;
    eval.training = false;
    expect_gradients(
        [&](Graph& g) { return batchnorm2d(g.parameter(x), g.parameter(gamma), g.parameter(beta), rm, rv, eval); },
        {&x, &gamma, &beta});
}

TEST(BatchNorm, EvalModeIsDeterministic) {
    const Tensor x = random_tensor({2, 2, 3, 3}, 54);
    Parameter rm("rm", random_tensor({2}, 55), false), rv("rv", random_tensor({2}, 56, 0.5, 2.0), false);
    BatchNormOptions eval;
    eval.training = false;
    auto run = [&] {
        Graph g(false);
        return batchnorm2d(g.constant(x), g.constant(Tensor({2}, 1.0)), g.constant(Tensor({2})), rm, rv, eval).value();
    };
    const Tensor a = run(), b = run();
    EXPECT_TRUE((a.values() == b.values()).all());
}

TEST(Graph, FanOutAccumulates) {
    Parameter x("x", Tensor({1}, 0.7));
    Graph g;
    const Var v = g.parameter(x);
    const Var f = softplus(v);
    g.backward(sum(f + f));
    EXPECT_NEAR(x.grad[0], 2.0 / (1.0 + std::exp(-0.7)), 1e-15);
}

TEST(Graph, NonFiniteValuesNameTheOp) {
    Graph g;
    const Var big = g.constant(Tensor({1}, 1e308));
    try {
        scale(big, 10.0);
        FAIL();
    } catch (const NonFiniteError& e) {
        EXPECT_NE(std::string(e.what()).find("scale"), std::string::npos) << e.what();
    }
}

TEST(Graph, ShapeMismatchNamesBothShapes) {
    Graph g;
    try {
        add(g.constant(Tensor({2, 3})), g.constant(Tensor({3, 2})));
        FAIL();
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("(2, 3)"), std::string::npos);
        EXPECT_NE(msg.find("(3, 2)"), std::string::npos);
    }
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    Parameter p = param("p", {5}, 60);
    const Tensor before = p.value;
    Adam opt({{{&p}, 0.1}});
    for (int i = 0; i < 10; ++i) opt.step();
    EXPECT_TRUE((p.value.values() == before.values()).all());
}

TEST(Adam, ClosedFormFirstStep) {
    Parameter p("p", Tensor({1}, 0.0));
    Adam opt({{{&p}, 0.1}});
    p.grad[0] = 1.0;
    opt.step();
    // m_hat = 1, v_hat = 1, update = lr / (1 + eps)
    EXPECT_DOUBLE_EQ(-p.value[0], 0.09999999900000002);
}

TEST(Adam, GroupsUpdateIndependently) {
    Parameter a("a", Tensor({1}, 0.0)), b("b", Tensor({1}, 0.0)), c("c", Tensor({1}, 0.0));
    c.frozen = true;
    Adam opt({{{&a}, 0.1}, {{&b, &c}, 0.01}});
    a.grad[0] = b.grad[0] = c.grad[0] = 1.0;
    opt.step();
    EXPECT_NEAR(a.value[0], -0.1, 1e-8);
    EXPECT_NEAR(b.value[0], -0.01, 1e-9);
    EXPECT_EQ(c.value[0], 0.0);
    EXPECT_THROW(Adam({{{&a}, 0.0}}), std::invalid_argument);
}

TEST(Checkpoint, BitExactRoundTrip) {
    const auto dir = scratch_dir();
    Parameter a = param("net.a", {2, 3}, 70), b("net.b", random_tensor({4}, 71), false);
    a.value[0] = 0.1 + 0.2;
    Adam opt({{{&a}, 0.01}});
    a.grad = random_tensor({2, 3}, 72);
    opt.step();
    write_checkpoint(dir / "c.tswt", Checkpoint::capture({&a, &b}, &opt));
    const Checkpoint back = read_checkpoint(dir / "c.tswt");
    ASSERT_EQ(back.params.size(), 2u);
    EXPECT_TRUE((back.find("net.a")->value.values() == a.value.values()).all());
    EXPECT_FALSE(back.find("net.b")->trainable);
    ASSERT_TRUE(back.optimizer.has_value());
    EXPECT_EQ(back.optimizer->step, 1);
    EXPECT_TRUE((back.optimizer->moments[0].v.values() == opt.slots()[0].v.values()).all());

    write_checkpoint(dir / "d.tswt", back);
    std::ifstream x(dir / "c.tswt", std::ios::binary), y(dir / "d.tswt", std::ios::binary);
    const std::string sx((std::istreambuf_iterator<char>(x)), {}), sy((std::istreambuf_iterator<char>(y)), {});
    EXPECT_EQ(sx, sy);

    Parameter c("net.a", Tensor({3, 2}));
    EXPECT_THROW(back.apply({&c}), std::invalid_argument);
    EXPECT_THROW(read_checkpoint(dir / "missing.tswt"), tomo::IoError);
}
