#include "tomo/simulator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

using namespace tomo;

namespace {

BuildingPrimitive box(double x, double y, double w, double d, double h) {
    BuildingPrimitive b;
    b.position = {x, y};
    b.footprint = {w, d};
    b.height = h;
    return b;
}

/// Short cuboid with a tall slab right in front of it (towards the sensor).
SceneModel two_box_scene() {
    SceneModel s;
    s.ranges = 80;
    s.azimuths = 40;
    s.ground.enabled = false;
    s.primitives = {box(10, 10, 10, 10, 5), box(5, 22, 20, 2, 30)};
    return s;
}

PointCloud single_point(const TomoGeometry& g, double r, double a, double s, double amp = 1.0) {
    Eigen::Matrix3Xd p(3, 1);
    p.col(0) = elevation_to_xyz(g, r, a, s);
    return PointCloud::from_points(p, Eigen::VectorXd::Constant(1, amp));
}

}  // namespace

TEST(Simulator, SensorDirectionIsUnit) {
    EXPECT_NEAR(sensor_direction(TomoGeometry{}).norm(), 1.0, 1e-15);
}

TEST(Simulator, ConvexCuboidSelfOcclusion) {
    const TomoGeometry g;
    SceneModel s;
    s.ground.enabled = false;
    s.primitives = {box(10, 5, 12, 8, 6)};
    const PointCloud c = sample_point_cloud(s, g, 4.0, 7);
    ASSERT_GT(c.size(), 0);
    std::size_t front = 0, back = 0, roof = 0;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        const Eigen::Vector3d p = c.points.col(i);
        const bool vis = c.visible[static_cast<std::size_t>(i)];
        if (std::abs(p.y() - 13.0) < 1e-9 && p.z() < 6.0 - 1e-9) {
            EXPECT_TRUE(vis) << "sensor-facing wall sample hidden";
            ++front;
        } else if (std::abs(p.y() - 5.0) < 1e-9 && p.z() < 6.0 - 1e-9) {
            EXPECT_FALSE(vis) << "back wall sample visible";
            ++back;
        } else if (std::abs(p.z() - 6.0) < 1e-9) {
            EXPECT_TRUE(vis) << "roof sample hidden";
            ++roof;
        }
    }
    EXPECT_GT(front, 0u);
    EXPECT_GT(back, 0u);
    EXPECT_GT(roof, 0u);
}

TEST(Simulator, SlabHidesFacingWallOfShortBox) {
    const TomoGeometry g;
    const SceneModel s = two_box_scene();
    ASSERT_NO_THROW(validate_scene(s, g));
    const PointCloud c = sample_point_cloud(s, g, 4.0, 11);
    std::size_t facing = 0;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        if (c.source[static_cast<std::size_t>(i)] == 0 && std::abs(c.points(1, i) - 20.0) < 1e-9) {
            ++facing;
            EXPECT_FALSE(c.visible[static_cast<std::size_t>(i)]);
        }
    }
    EXPECT_GT(facing, 0u);
    EXPECT_EQ(c.visible_count_from(0), 0u);
    EXPECT_GT(c.visible_count_from(1), 0u);
}

TEST(Simulator, AddingPrimitiveNeverIncreasesVisibility) {
    const TomoGeometry g;
    SceneModel s;
    s.ranges = 80;
    s.azimuths = 40;
    s.primitives = {box(10, 10, 10, 10, 5)};
    const PointCloud before = sample_point_cloud(s, g, 2.0, 3);
    s.primitives.push_back(box(5, 22, 20, 2, 12));
    const PointCloud after = sample_point_cloud(s, g, 2.0, 3);
    EXPECT_LE(after.visible_count_from(0), before.visible_count_from(0));
    EXPECT_LE(after.visible_count_from(-1), before.visible_count_from(-1));
}

TEST(Simulator, DensityDoublingDoublesCount) {
    const TomoGeometry g;
    SceneModel s;
    s.primitives = {box(10, 5, 12, 8, 6)};
    const double n1 = static_cast<double>(sample_point_cloud(s, g, 2.0, 5).visible_count());
    const double n2 = static_cast<double>(sample_point_cloud(s, g, 4.0, 5).visible_count());
    EXPECT_NEAR(n2 / n1, 2.0, 0.2);
}

TEST(Simulator, SamplingIsSeeded) {
    const TomoGeometry g;
    SceneModel s;
    s.primitives = {box(10, 5, 12, 8, 6)};
    const PointCloud a = sample_point_cloud(s, g, 3.0, 9), b = sample_point_cloud(s, g, 3.0, 9);
    ASSERT_EQ(a.size(), b.size());
    EXPECT_TRUE((a.points.array() == b.points.array()).all());
}

TEST(Simulator, EmptySceneGivesEmptyCloud) {
    SceneModel s;
    s.ground.enabled = false;
    EXPECT_TRUE(sample_point_cloud(s, TomoGeometry{}, 4.0, 1).empty());
}

TEST(Simulator, ValidateRejectsBadScenes) {
    const TomoGeometry g;
    SceneModel s;
    s.primitives = {box(10, 5, 12, 8, -1)};
    EXPECT_THROW(validate_scene(s, g), std::invalid_argument);
    s.primitives = {box(40, 5, 12, 8, 3)};
    EXPECT_THROW(validate_scene(s, g), std::invalid_argument);
    s.primitives = {box(10, 5, 12, 8, 40)};
    EXPECT_THROW(validate_scene(s, g), std::invalid_argument);
    EXPECT_THROW(sample_point_cloud(SceneModel{}, g, 0.0, 1), std::invalid_argument);
}

TEST(Voxelize, SinglePointAtBinCenter) {
    const TomoGeometry g;
    const auto v = voxelize_ground_truth(single_point(g, 4, 6, 17.0), g, 10, 10);
    EXPECT_EQ(v.dropped, 0u);
    EXPECT_DOUBLE_EQ(v.volume(4, 6, 17), 1.0);
    EXPECT_DOUBLE_EQ(v.volume.data().sum(), 1.0);
}

TEST(Voxelize, AdditiveWithinCell) {
    const TomoGeometry g;
    Eigen::Matrix3Xd p(3, 2);
    p.col(0) = elevation_to_xyz(g, 2, 2, 9.9);
    p.col(1) = elevation_to_xyz(g, 2, 2, 10.1);
    const auto v = voxelize_ground_truth(PointCloud::from_points(p, Eigen::Vector2d(0.5, 0.5)), g, 5, 5);
    EXPECT_DOUBLE_EQ(v.volume(2, 2, 10), 1.0);
}

TEST(Voxelize, MassConservation) {
    const TomoGeometry g;
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> cell(0.0, 19.0), s(0.0, 120.0), amp(0.0, 2.0);
    Eigen::Matrix3Xd p(3, 1000);
    Eigen::VectorXd a(1000);
    for (int i = 0; i < 1000; ++i) {
        p.col(i) = elevation_to_xyz(g, cell(rng), cell(rng), s(rng));
        a[i] = amp(rng);
    }
    const auto v = voxelize_ground_truth(PointCloud::from_points(p, a), g, 20, 20);
    EXPECT_EQ(v.dropped, 0u);
    EXPECT_NEAR(v.volume.data().sum(), a.sum(), 1e-9);
}

TEST(Voxelize, OutOfBoundsDropped) {
    const TomoGeometry g;
    const auto v = voxelize_ground_truth(single_point(g, 30, 2, 5.0), g, 10, 10);
    EXPECT_EQ(v.dropped, 1u);
    EXPECT_EQ(v.volume.data().sum(), 0.0);
}

TEST(Echoes, EmptyCellsAreZero) {
    const TomoGeometry g;
    const EchoTensor e = synthesize_echoes(single_point(g, 1, 1, 30.0), g, 3, 3, noiseless, 1);
    for (Eigen::Index c = 0; c < 9; ++c) {
        if (c == e.cell(1, 1)) continue;
        EXPECT_EQ(e.data.col(c).norm(), 0.0);
    }
}

TEST(Echoes, OnGridPointEqualsSteeringColumn) {
    const TomoGeometry g;
    const SteeringMatrix A = build_steering_matrix(g);
    const EchoTensor e = synthesize_echoes(single_point(g, 1, 2, 37.0), g, 3, 3, noiseless, 1);
    EXPECT_LT((e.data.col(e.cell(1, 2)) - A.entries.col(37)).norm(), 1e-12);
}

TEST(Echoes, HalfBinPointCorrelatesWithNeighbors) {
    const TomoGeometry g;
    const SteeringMatrix A = build_steering_matrix(g);
    const EchoTensor e = synthesize_echoes(single_point(g, 0, 0, 50.5), g, 1, 1, noiseless, 1);
    const Eigen::VectorXd corr = (A.entries.adjoint() * e.data.col(0)).cwiseAbs();
    Eigen::Index peak;
    const double top = corr.maxCoeff(&peak);
    EXPECT_TRUE(peak == 50 || peak == 51);
    for (Eigen::Index l = 0; l < corr.size(); ++l) {
        if (l != 50 && l != 51) EXPECT_LT(corr[l], 0.99 * top);
    }
}

TEST(Echoes, MatchesPerPointSummation) {
    const TomoGeometry g;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> s(0.0, 127.0), amp(0.1, 1.0);
    std::uniform_int_distribution<int> cell(0, 2);
    Eigen::Matrix3Xd p(3, 10);
    Eigen::VectorXd a(10);
    for (int i = 0; i < 10; ++i) {
        p.col(i) = elevation_to_xyz(g, cell(rng), cell(rng), s(rng));
        a[i] = amp(rng);
    }
    const PointCloud cloud = PointCloud::from_points(p, a);
    const EchoTensor e = synthesize_echoes(cloud, g, 3, 3, noiseless, 1);
    const auto& b = g.params().baselines;
    for (Eigen::Index r = 0; r < 3; ++r) {
        for (Eigen::Index az = 0; az < 3; ++az) {
            for (std::size_t n = 0; n < b.size(); ++n) {
                std::complex<double> want = 0.0;
                for (int i = 0; i < 10; ++i) {
                    const Eigen::Vector3d c = xyz_to_cell(g, p.col(i));
                    if (std::lround(c.x()) != r || std::lround(c.y()) != az) continue;
                    want += a[i] * std::polar(1.0, -4.0 * M_PI * b[n] * c.z() / (0.031 * 2040.3406));
                }
                const std::complex<double> got = e.data(static_cast<Eigen::Index>(n), e.cell(r, az));
                EXPECT_LE(std::abs(got - want), 1e-12 * std::max(1.0, std::abs(want)));
            }
        }
    }
}

TEST(Echoes, NoiseMatchesRequestedSnr) {
    const TomoGeometry g;
    const PointCloud cloud = single_point(g, 0, 0, 20.0);
    const EchoTensor clean = synthesize_echoes(cloud, g, 40, 40, noiseless, 3);
    const EchoTensor noisy = synthesize_echoes(cloud, g, 40, 40, 10.0, 3);
    // Signal power per sample of the single nonzero cell is 1; 10 dB -> sigma^2 = 0.1.
    const double noise = (noisy.data - clean.data).squaredNorm() / static_cast<double>(noisy.data.size());
    EXPECT_NEAR(noise, 0.1, 0.01);
    const EchoTensor again = synthesize_echoes(cloud, g, 40, 40, 10.0, 3);
    EXPECT_TRUE((again.data.array() == noisy.data.array()).all());
}

TEST(Catalog, ScenesAreValidAndVaried) {
    const TomoGeometry g;
    const auto cat = random_catalog(12, 48, 48, g, 4);
    ASSERT_EQ(cat.size(), 12u);
    std::set<int> kinds;
    for (const auto& s : cat) {
        EXPECT_NO_THROW(validate_scene(s, g));
        EXPECT_GE(s.primitives.size(), 1u);
        EXPECT_LE(s.primitives.size(), 3u);
        for (const auto& p : s.primitives) kinds.insert(static_cast<int>(p.kind));
    }
    EXPECT_EQ(kinds.size(), 3u);
}
