#include "tomo/metrics.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace tomo;
using Eigen::Index;

namespace {

Eigen::Matrix3Xd random_points(Index n, std::mt19937_64& rng, double extent = 50.0) {
    std::uniform_real_distribution<double> d(0.0, extent);
    Eigen::Matrix3Xd p(3, n);
    for (Index i = 0; i < n; ++i) p.col(i) = Eigen::Vector3d(d(rng), d(rng), d(rng));
    return p;
}

PointCloud cloud(Eigen::Matrix3Xd p) {
    const Index n = p.cols();
    return PointCloud::from_points(std::move(p), Eigen::VectorXd::Ones(n));
}

}  // namespace

TEST(Metrics, IdenticalCloudsGiveZero) {
    std::mt19937_64 rng(1);
    const PointCloud c = cloud(random_points(300, rng));
    const MetricReport r = completeness_accuracy(c, c);
    EXPECT_EQ(r.completeness, 0.0);
    ASSERT_TRUE(r.accuracy.has_value());
    EXPECT_EQ(*r.accuracy, 0.0);
    EXPECT_EQ(r.truth_points, 300u);
}

TEST(Metrics, SinglePointsAtDistance) {
    const Eigen::Vector3d p(1.0, 2.0, 3.0), d(0.3, -1.2, 2.5);
    const MetricReport r = completeness_accuracy(cloud(Eigen::Matrix3Xd(p + d)), cloud(Eigen::Matrix3Xd(p)));
    EXPECT_DOUBLE_EQ(r.completeness, d.norm());
    EXPECT_DOUBLE_EQ(*r.accuracy, d.norm());
}

TEST(Metrics, PartialReconstruction) {
    Eigen::Matrix3Xd truth(3, 2);
    truth << 0, 4, 0, 0, 0, 3;
    const MetricReport r = completeness_accuracy(cloud(truth.leftCols(1)), cloud(truth));
    EXPECT_EQ(*r.accuracy, 0.0);
    EXPECT_DOUBLE_EQ(r.completeness, 2.5);
}

TEST(Metrics, EmptyCloudConventions) {
    const PointCloud some = cloud(Eigen::Matrix3Xd::Zero(3, 2));
    const MetricReport r = completeness_accuracy(cloud(Eigen::Matrix3Xd(3, 0)), some);
    EXPECT_TRUE(std::isinf(r.completeness));
    EXPECT_FALSE(r.accuracy.has_value());
    EXPECT_THROW(completeness_accuracy(some, cloud(Eigen::Matrix3Xd(3, 0))), std::invalid_argument);
}

TEST(Metrics, SwappingCloudsSwapsMetrics) {
    std::mt19937_64 rng(2);
    const PointCloud a = cloud(random_points(400, rng)), b = cloud(random_points(250, rng));
    const MetricReport ab = completeness_accuracy(a, b), ba = completeness_accuracy(b, a);
    EXPECT_EQ(ab.completeness, *ba.accuracy);
    EXPECT_EQ(*ab.accuracy, ba.completeness);
}

TEST(Metrics, TranslationEquivariance) {
    std::mt19937_64 rng(3);
    const Eigen::Matrix3Xd a = random_points(200, rng), b = random_points(150, rng);
    const Eigen::Vector3d t(1.5, -2.25, 4.0);
    const MetricReport base = completeness_accuracy(cloud(a), cloud(b));
    const MetricReport moved = completeness_accuracy(cloud(a.colwise() + t), cloud(b.colwise() + t));
    EXPECT_NEAR(moved.completeness, base.completeness, 1e-12);
    EXPECT_NEAR(*moved.accuracy, *base.accuracy, 1e-12);
}

TEST(Metrics, OtherStatistics) {
    Eigen::Matrix3Xd truth = Eigen::Matrix3Xd::Zero(3, 3);
    truth(0, 1) = 1.0;
    truth(0, 2) = 4.0;
    const PointCloud rec = cloud(Eigen::Matrix3Xd::Zero(3, 1));
    EXPECT_DOUBLE_EQ(completeness_accuracy(rec, cloud(truth), MetricStatistic::median).completeness, 1.0);
    EXPECT_DOUBLE_EQ(completeness_accuracy(rec, cloud(truth), MetricStatistic::rms).completeness, std::sqrt(17.0 / 3.0));
    EXPECT_EQ(parse_statistic("rms"), MetricStatistic::rms);
    EXPECT_THROW(parse_statistic("max"), std::invalid_argument);
}

TEST(KdTree, MatchesBruteForceExactly) {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<Index> size(1, 2000);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Matrix3Xd a = random_points(size(rng), rng), b = random_points(size(rng), rng);
        const Eigen::VectorXd fast = nearest_distances(a, b), slow = nearest_distances_brute(a, b);
        ASSERT_TRUE((fast.array() == slow.array()).all()) << "trial " << trial;
    }
}

TEST(KdTree, DuplicatesAndLattices) {
    // Integer lattices create many equidistant candidates.
    Eigen::Matrix3Xd lattice(3, 125);
    Index k = 0;
    for (int x = 0; x < 5; ++x)
        for (int y = 0; y < 5; ++y)
            for (int z = 0; z < 5; ++z) lattice.col(k++) = Eigen::Vector3d(x, y, z);
    Eigen::Matrix3Xd q(3, 64);
    for (Index i = 0; i < 64; ++i) q.col(i) = Eigen::Vector3d(0.5 * (i % 4), 0.5 * ((i / 4) % 4), 0.5 * (i / 16));
    EXPECT_TRUE((nearest_distances(q, lattice).array() == nearest_distances_brute(q, lattice).array()).all());
    const KdTree tree(Eigen::Matrix3Xd::Zero(3, 10));
    EXPECT_EQ(tree.nearest(Eigen::Vector3d(1, 0, 0)).second, 1.0);
}

TEST(Extraction, SingleVoxelGivesItsCell) {
    const TomoGeometry geom;
    ReflectivityVolume v(4, 5, 128);
    v(2, 3, 40) = 2.0;
    const PointCloud c = extract_point_cloud(v, geom, 0.1);
    ASSERT_EQ(c.size(), 1);
    EXPECT_TRUE(c.points.col(0).isApprox(elevation_to_xyz(geom, 2, 3, geom.elevation_of_bin(40)), 1e-15));
    EXPECT_EQ(c.amplitudes[0], 2.0);
}

TEST(Extraction, ThresholdBehaviour) {
    const TomoGeometry geom;
    ReflectivityVolume v(3, 3, 128);
    for (Index i = 0; i < v.size(); ++i) v.data()[i] = static_cast<double>(i % 97) / 96.0;
    v(1, 1, 7) = 5.0;
    EXPECT_EQ(extract_point_cloud(v, geom, 0.999).size(), 1);
    EXPECT_TRUE(extract_point_cloud(ReflectivityVolume(3, 3, 128), geom, 0.1).empty());
    EXPECT_THROW(extract_point_cloud(v, geom, 0.0), std::invalid_argument);
    EXPECT_THROW(extract_point_cloud(v, geom, 1.0), std::invalid_argument);
}

TEST(Extraction, VoxelizedTruthWithinHalfDiagonal) {
    const TomoGeometry geom;
    SceneModel scene;
    scene.ranges = 40;
    scene.azimuths = 30;
    BuildingPrimitive b;
    b.position = {5.0, 12.0};
    b.footprint = {12.0, 8.0};
    b.height = 15.0;
    scene.primitives.push_back(b);
    const PointCloud pts = sample_point_cloud(scene, geom, 4.0, 5).visible_only();
    const ReflectivityVolume truth = voxelize_ground_truth(pts, geom, scene.ranges, scene.azimuths).volume;
    // Any positive voxel is kept so every visible point has its own cell centre.
    const PointCloud extracted = extract_point_cloud(truth, geom, 1e-9);
    const auto& p = geom.params();
    const double inc = geom.incidence_rad();
    // Cell edges in x, y, z: azimuth, range plus the elevation bin's projection.
    const Eigen::Vector3d cell(p.azimuth_spacing, p.range_spacing + p.elevation_spacing * std::cos(inc),
                               p.elevation_spacing * std::sin(inc));
    const MetricReport r = completeness_accuracy(extracted, pts);
    EXPECT_LE(r.completeness, cell.norm() / 2);
}
