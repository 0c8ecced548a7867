#include "tomo/solvers.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace tomo;
using Eigen::Index;

namespace {

using cd = std::complex<double>;

TomoGeometry grid(int bins) {
    GeometryParams p;
    p.elevation_bins = bins;
    return TomoGeometry(p);
}

Eigen::VectorXcd on_grid_echo(const Eigen::MatrixXcd& A, const std::vector<std::pair<Index, cd>>& scatterers) {
    Eigen::VectorXcd g = Eigen::VectorXcd::Zero(A.rows());
    for (const auto& [l, amp] : scatterers) g += amp * A.col(l);
    return g;
}

Eigen::VectorXcd random_vector(Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> d;
    Eigen::VectorXcd v(n);
    for (Index i = 0; i < n; ++i) v[i] = {d(rng), d(rng)};
    return v;
}

}  // namespace

TEST(SoftThreshold, Examples) {
    EXPECT_EQ(soft_threshold(cd(0, 0), 0.5), cd(0, 0));
    const cd z = std::polar(1.2, M_PI / 4);
    const cd out = soft_threshold(z, 0.5);
    EXPECT_NEAR(std::abs(out), 0.7, 1e-15);
    EXPECT_NEAR(std::arg(out), M_PI / 4, 1e-15);
    EXPECT_EQ(soft_threshold(cd(0.3, 0.4), 0.5), cd(0, 0));
    std::mt19937_64 rng(3);
    const Eigen::VectorXcd v = random_vector(50, rng);
    EXPECT_TRUE((soft_threshold(v, 0.0).array() == v.array()).all());
}

TEST(SoftThreshold, NonExpansive) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> th(0.0, 2.0);
    for (int i = 0; i < 2000; ++i) {
        const Eigen::VectorXcd ab = random_vector(2, rng);
        const double t = th(rng);
        EXPECT_LE(std::abs(soft_threshold(ab[0], t) - soft_threshold(ab[1], t)), std::abs(ab[0] - ab[1]) + 1e-15);
    }
}

TEST(Ista, ZeroEchoGivesZeroInOneIteration) {
    const auto A = build_steering_matrix(grid(32));
    SolverConfig cfg;
    cfg.variant = SolverVariant::ista;
    const auto res = ista_reconstruct(Eigen::VectorXcd::Zero(11), A, cfg);
    EXPECT_EQ(res.iterations, 1);
    EXPECT_TRUE(res.estimate.isZero(0.0));
}

TEST(Ista, IdentityOperatorFixedPoint) {
    std::mt19937_64 rng(11);
    const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(6, 6);
    const Eigen::VectorXcd g = random_vector(6, rng);
    const auto one = ista_iterate<double>(g, I, 1.0, 0.3, 1, 0.0);
    EXPECT_TRUE(one.estimate.isApprox(soft_threshold(g, 0.3), 1e-15));
    const auto more = ista_iterate<double>(g, I, 1.0, 0.3, 10, 1e-12);
    EXPECT_EQ(more.iterations, 2);
    EXPECT_TRUE(more.estimate.isApprox(one.estimate, 1e-15));
}

TEST(Ista, SingleScattererPeaksAtMatchedFilterBin) {
    const auto A = build_steering_matrix(TomoGeometry{});
    const Index truth = 40;
    const Eigen::VectorXcd g = on_grid_echo(A.entries, {{truth, cd(1, 0)}});
    Index oracle = 0;
    (A.entries.adjoint() * g).cwiseAbs().maxCoeff(&oracle);
    SolverConfig cfg;
    cfg.variant = SolverVariant::ista;
    cfg.relative_threshold = false;
    cfg.threshold = 0.01;
    cfg.max_iters = 500;
    cfg.stop_tol = 0.0;
    Index got = 0;
    ista_reconstruct(g, A, cfg).estimate.cwiseAbs().maxCoeff(&got);
    EXPECT_EQ(oracle, truth);
    EXPECT_EQ(got, oracle);
}

TEST(Ista, ObjectiveNonIncreasing) {
    std::mt19937_64 rng(5);
    const auto A = build_steering_matrix(grid(32));
    const double step = default_step(A.entries);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::VectorXcd g = random_vector(11, rng);
        std::vector<double> obj;
        ista_iterate<double>(g, A.entries, step, 0.2, 300, 0.0, &obj);
        for (std::size_t k = 1; k < obj.size(); ++k) EXPECT_LE(obj[k], obj[k - 1] * (1 + 1e-12) + 1e-15);
    }
}

TEST(Ista, ScalingCovariance) {
    std::mt19937_64 rng(9);
    const auto A = build_steering_matrix(grid(32));
    const double step = default_step(A.entries);
    const Eigen::VectorXcd g = random_vector(11, rng);
    const double c = 3.5;
    const auto base = ista_iterate<double>(g, A.entries, step, 0.4, 200, 0.0);
    const auto scaled = ista_iterate<double>(Eigen::VectorXcd(c * g), A.entries, step, c * 0.4, 200, 0.0);
    EXPECT_TRUE(scaled.estimate.isApprox(c * base.estimate, 1e-10));
}

TEST(Fista, MomentumSequence) {
    double t = 1.0;
    std::vector<double> seq{t};
    for (int k = 0; k < 2; ++k) {
        t = (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
        seq.push_back(t);
    }
    EXPECT_DOUBLE_EQ(seq[1], 1.618033988749895);
    EXPECT_DOUBLE_EQ(seq[2], 2.193527085331054);
}

TEST(Fista, ConvergesToLeastSquares) {
    // Eleven passes against the three scatterer columns of a 32-bin grid form
    // an overdetermined system; the normal equations give the oracle.
    const auto full = build_steering_matrix(grid(32)).entries;
    const std::vector<Index> bins{4, 15, 27};
    Eigen::MatrixXcd A(11, 3);
    for (std::size_t i = 0; i < bins.size(); ++i) A.col(static_cast<Index>(i)) = full.col(bins[i]);
    const Eigen::VectorXcd g = A * Eigen::Vector3cd(cd(1, 0), cd(0.5, -0.2), cd(-0.3, 0.8));
    const Eigen::VectorXcd ls = (A.adjoint() * A).ldlt().solve(A.adjoint() * g);
    const double step = 1.0 / spectral_norm_sq<double>(A);
    const auto res = fista_iterate<double>(g, A, step, 0.0, 200, 0.0);
    EXPECT_LT((A * res.estimate - g).norm(), 1e-6);
    EXPECT_LT((res.estimate - ls).norm(), 1e-6);
}

TEST(Fista, ObjectiveBelowIstaFromFifthIteration) {
    const auto A = build_steering_matrix(grid(32)).entries;
    const Eigen::VectorXcd g = on_grid_echo(A, {{4, cd(1, 0)}, {15, cd(0.5, -0.2)}, {27, cd(-0.3, 0.8)}});
    const double step = 1.0 / spectral_norm_sq<double>(A);
    std::vector<double> fo, io;
    fista_iterate<double>(g, A, step, 0.0, 200, 0.0, &fo);
    ista_iterate<double>(g, A, step, 0.0, 200, 0.0, &io);
    ASSERT_EQ(fo.size(), io.size());
    for (std::size_t k = 4; k < fo.size(); ++k) EXPECT_LE(fo[k], io[k]) << "iteration " << k + 1;
}

TEST(Solvers, RejectNonFiniteInput) {
    const auto A = build_steering_matrix(grid(16));
    Eigen::VectorXcd g = Eigen::VectorXcd::Ones(11);
    g[3] = cd(std::nan(""), 0);
    EXPECT_THROW(fista_reconstruct(g, A, {}), std::invalid_argument);
    EXPECT_THROW(ista_reconstruct(Eigen::VectorXcd::Ones(5), A, {}), std::invalid_argument);
    SolverConfig bad;
    bad.max_iters = 0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(SolveVolume, ZeroEchoesGiveZeroVolume) {
    const auto A = build_steering_matrix(grid(16));
    EchoTensor e{Eigen::MatrixXcd::Zero(11, 6), 2, 3};
    const auto sol = solve_volume(e, A, {});
    EXPECT_TRUE((sol.magnitude.data() == 0.0).all());
    EXPECT_FALSE(sol.step_above_bound);
}

TEST(SolveVolume, MatchesPerCellSolves) {
    const auto A = build_steering_matrix(grid(32));
    EchoTensor e{Eigen::MatrixXcd(11, 4), 2, 2};
    for (Index c = 0; c < 4; ++c) e.data.col(c) = on_grid_echo(A.entries, {{3 + 7 * c, std::polar(1.0, 0.3 * c)}});
    SolverConfig cfg;
    cfg.variant = SolverVariant::ista;
    const auto sol = solve_volume(e, A, cfg);
    for (Index r = 0; r < 2; ++r)
        for (Index a = 0; a < 2; ++a) {
            const auto single = ista_reconstruct(e.data.col(e.cell(r, a)), A, cfg);
            EXPECT_TRUE((sol.complex.column(r, a) == single.estimate.array()).all());
        }
}

TEST(SolveVolume, StepAboveBoundIsFlagged) {
    const auto A = build_steering_matrix(grid(16));
    SolverConfig cfg;
    cfg.step = 2.0 / spectral_norm_sq<double>(A.entries);
    cfg.max_iters = 5;
    EchoTensor e{Eigen::MatrixXcd::Zero(11, 1), 1, 1};
    EXPECT_TRUE(solve_volume(e, A, cfg).step_above_bound);
    e.data.resize(10, 1);
    EXPECT_THROW(solve_volume(e, A, cfg), std::invalid_argument);
}

TEST(SolveVolume, NoiselessSceneRecoversElevation) {
    const TomoGeometry geom;
    SceneModel scene;
    scene.ranges = 24;
    scene.azimuths = 12;
    BuildingPrimitive b;
    b.position = {2.0, 10.0};
    b.footprint = {6.0, 6.0};
    b.height = 12.0;
    scene.primitives.push_back(b);
    scene.ground.enabled = false;
    const PointCloud cloud = sample_point_cloud(scene, geom, 1.0, 17);
    const auto truth = voxelize_ground_truth(cloud, geom, scene.ranges, scene.azimuths).volume;
    const EchoTensor echoes = synthesize_echoes(cloud, geom, scene.ranges, scene.azimuths, noiseless, 1);
    const auto sol = solve_volume(echoes, build_steering_matrix(geom), {});
    int checked = 0;
    for (Index r = 0; r < truth.ranges(); ++r)
        for (Index a = 0; a < truth.azimuths(); ++a) {
            const auto col = truth.column(r, a);
            // Cells with a single occupied bin have an unambiguous answer.
            if ((col > 0.0).count() != 1) continue;
            Index want = 0, got = 0;
            col.maxCoeff(&want);
            sol.magnitude.column(r, a).maxCoeff(&got);
            EXPECT_LE(std::abs(got - want), 1) << "cell " << r << "," << a;
            ++checked;
        }
    EXPECT_GT(checked, 10);
}
