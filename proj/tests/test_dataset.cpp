#include "tomo/dataset.hpp"

#include "test_util.hpp"

#include <fstream>

using namespace tomo;

namespace {

std::vector<SceneModel> small_catalog(std::size_t n) { return random_catalog(n, 24, 24, TomoGeometry{}, 8); }

void expect_identical(const DatasetRecord& a, const DatasetRecord& b) {
    EXPECT_EQ(a.name, b.name);
    EXPECT_TRUE(a.geometry == b.geometry);
    EXPECT_EQ(a.echoes.ranges, b.echoes.ranges);
    EXPECT_EQ(a.echoes.azimuths, b.echoes.azimuths);
    EXPECT_TRUE((a.echoes.data.array() == b.echoes.data.array()).all());
    EXPECT_TRUE(a.truth.same_shape(b.truth));
    EXPECT_TRUE((a.truth.data() == b.truth.data()).all());
    ASSERT_EQ(a.cloud.size(), b.cloud.size());
    EXPECT_TRUE((a.cloud.points.array() == b.cloud.points.array()).all());
    EXPECT_TRUE((a.cloud.amplitudes.array() == b.cloud.amplitudes.array()).all());
}

}  // namespace

TEST(Split, TwelveRecordsSplitEightTwoTwo) {
    const DatasetSplit s = split_indices(12);
    EXPECT_EQ(s.train.size(), 8u);
    EXPECT_EQ(s.val.size(), 2u);
    EXPECT_EQ(s.test.size(), 2u);
    EXPECT_EQ(s.test.back(), 11u);
    const DatasetSplit one = split_indices(1);
    EXPECT_EQ(one.train.size(), 1u);
}

TEST(Dataset, SingleSceneRoundTrip) {
    const auto dir = scratch_dir();
    const TomoGeometry g;
    const auto written = generate_dataset(small_catalog(1), g, {}, dir / "one.tsrd");
    ASSERT_EQ(written.size(), 1u);
    EXPECT_TRUE(std::filesystem::exists(dir / "one.tsrd.split.json"));
    const auto read = read_dataset(dir / "one.tsrd");
    ASSERT_EQ(read.size(), 1u);
    expect_identical(written[0], read[0]);
}

TEST(Dataset, RewriteIsBitIdentical) {
    const auto dir = scratch_dir();
    const auto recs = simulate_records(small_catalog(3), TomoGeometry{}, {4.0, 20.0, 5});
    write_dataset(dir / "a.tsrd", recs);
    write_dataset(dir / "b.tsrd", read_dataset(dir / "a.tsrd"));
    std::ifstream a(dir / "a.tsrd", std::ios::binary), b(dir / "b.tsrd", std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    EXPECT_EQ(sa, sb);
}

TEST(Dataset, SimulationIsReproducible) {
    const auto a = simulate_records(small_catalog(2), TomoGeometry{}, {4.0, 20.0, 5});
    const auto b = simulate_records(small_catalog(2), TomoGeometry{}, {4.0, 20.0, 5});
    for (std::size_t i = 0; i < a.size(); ++i) expect_identical(a[i], b[i]);
}

TEST(Dataset, RecordShapes) {
    const auto recs = simulate_records(small_catalog(1), TomoGeometry{}, {});
    EXPECT_EQ(recs[0].echoes.baselines(), 11);
    EXPECT_EQ(recs[0].echoes.data.cols(), 24 * 24);
    EXPECT_EQ(recs[0].truth.shape_string(), "24x24x128");
    EXPECT_EQ(recs[0].cloud.visible_count(), static_cast<std::size_t>(recs[0].cloud.size()));
}

TEST(Dataset, ErrorsNameThePath) {
    const auto dir = scratch_dir();
    try {
        read_dataset(dir / "missing.tsrd");
        FAIL();
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("missing.tsrd"), std::string::npos);
    }
    {
        std::ofstream junk(dir / "junk.tsrd", std::ios::binary);
        junk << "NOPE";
    }
    EXPECT_THROW(read_dataset(dir / "junk.tsrd"), IoError);
    EXPECT_THROW(write_dataset(dir / "no_such_dir" / "x.tsrd", {}), IoError);
}

TEST(Volumes, RoundTrip) {
    const auto dir = scratch_dir();
    ReflectivityVolume v(3, 4, 5);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = 0.25 * static_cast<double>(i);
    write_volumes(dir / "v.tsrv", {{"a", v}, {"b", v}});
    const auto back = read_volumes(dir / "v.tsrv");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].name, "b");
    EXPECT_TRUE((back[0].volume.data() == v.data()).all());
}
