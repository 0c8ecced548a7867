#include "tomo/dataset.hpp"

#include "binary_io.hpp"
#include "tomo/parallel.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace tomo {

using detail::Reader;
using detail::Writer;

namespace {

double round_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

DatasetSplit split_indices(std::size_t n) {
    DatasetSplit s;
    std::size_t held = n >= 3 ? std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(n / 6.0))) : 0;
    const std::size_t n_train = n - 2 * held;
    for (std::size_t i = 0; i < n; ++i) {
        if (i < n_train) s.train.push_back(i);
        else if (i < n_train + held) s.val.push_back(i);
        else s.test.push_back(i);
    }
    return s;
}

void quantize_to_f32(DatasetRecord& r) {
    r.echoes.data = r.echoes.data.unaryExpr([](std::complex<double> z) {
        return std::complex<double>(round_f32(z.real()), round_f32(z.imag()));
    });
    r.truth.data() = r.truth.data().unaryExpr(&round_f32);
    r.cloud.points = r.cloud.points.unaryExpr(&round_f32);
    r.cloud.amplitudes = r.cloud.amplitudes.unaryExpr(&round_f32);
}

std::vector<DatasetRecord> simulate_records(const std::vector<SceneModel>& catalog, const TomoGeometry& geom,
                                            const SimulationOptions& opts) {
    if (catalog.empty()) throw std::invalid_argument("simulate: empty scene catalog");
    std::vector<DatasetRecord> records(catalog.size(), DatasetRecord{"", geom, {}, {}, {}});
    parallel_for(static_cast<std::ptrdiff_t>(catalog.size()), [&](std::ptrdiff_t i) {
        const SceneModel& scene = catalog[static_cast<std::size_t>(i)];
        validate_scene(scene, geom);
        const std::uint64_t scene_seed = derive_seed(opts.seed, static_cast<std::uint64_t>(i));
        PointCloud cloud = sample_point_cloud(scene, geom, opts.density, derive_seed(scene_seed, 1));
        DatasetRecord& rec = records[static_cast<std::size_t>(i)];
        std::ostringstream name;
        name << "scene_" << std::setw(3) << std::setfill('0') << i;
        rec.name = name.str();
        rec.truth = voxelize_ground_truth(cloud, geom, scene.ranges, scene.azimuths).volume;
        rec.echoes = synthesize_echoes(cloud, geom, scene.ranges, scene.azimuths, opts.snr_db, derive_seed(scene_seed, 2));
        rec.cloud = cloud.visible_only();
        quantize_to_f32(rec);
    });
    return records;
}

std::vector<DatasetRecord> generate_dataset(const std::vector<SceneModel>& catalog, const TomoGeometry& geom,
                                            const SimulationOptions& opts, const std::filesystem::path& path) {
    auto records = simulate_records(catalog, geom, opts);
    write_dataset(path, records);
    const DatasetSplit split = split_indices(records.size());
    nlohmann::json j;
    j["train"] = split.train;
    j["val"] = split.val;
    j["test"] = split.test;
    const std::filesystem::path side = path.string() + ".split.json";
    std::ofstream out(side);
    if (!out) throw IoError("cannot open for writing: " + side.string());
    out << j.dump(2) << "\n";
    return records;
}

void write_dataset(const std::filesystem::path& path, const std::vector<DatasetRecord>& records) {
    if (records.size() > 0xffffu) throw std::invalid_argument("write_dataset: too many records for a u16 count");
    Writer w(path);
    w.bytes("TSRD", 4);
    w.uint<std::uint16_t>(1);
    w.uint<std::uint16_t>(static_cast<std::uint16_t>(records.size()));
    for (const auto& rec : records) {
        const auto& g = rec.geometry.params();
        const auto& e = rec.echoes;
        const auto& v = rec.truth;
        if (e.ranges != v.ranges() || e.azimuths != v.azimuths() || v.bins() != rec.geometry.elevation_bins() ||
            e.baselines() != rec.geometry.baseline_count()) {
            throw std::invalid_argument("write_dataset: record " + rec.name + " has inconsistent shapes");
        }
        w.str(rec.name);
        w.uint(static_cast<std::uint32_t>(v.ranges()));
        w.uint(static_cast<std::uint32_t>(v.azimuths()));
        w.uint(static_cast<std::uint32_t>(v.bins()));
        w.uint(static_cast<std::uint32_t>(e.baselines()));
        for (double x : {g.wavelength, g.reference_range, g.incidence_deg, g.elevation_spacing, g.elevation_origin,
                         g.range_spacing, g.azimuth_spacing, e.snr_db}) {
            w.f64(x);
        }
        for (double b : g.baselines) w.f64(b);
        for (Eigen::Index n = 0; n < e.baselines(); ++n) {
            for (Eigen::Index c = 0; c < e.data.cols(); ++c) {
                w.f32(e.data(n, c).real());
                w.f32(e.data(n, c).imag());
            }
        }
        for (Eigen::Index i = 0; i < v.size(); ++i) w.f32(v.data()[i]);
        const auto& pc = rec.cloud;
        w.uint(static_cast<std::uint32_t>(pc.size()));
        for (Eigen::Index i = 0; i < pc.size(); ++i) {
            for (int k = 0; k < 3; ++k) w.f32(pc.points(k, i));
        }
        for (Eigen::Index i = 0; i < pc.size(); ++i) w.f32(pc.amplitudes[i]);
    }
    w.close();
}

std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path) {
    Reader r(path);
    r.magic("TSRD");
    const auto version = r.uint<std::uint16_t>();
    if (version != 1) throw IoError("unsupported TSRD version " + std::to_string(version) + " in " + path.string());
    const auto count = r.uint<std::uint16_t>();
    std::vector<DatasetRecord> records;
    records.reserve(count);
    for (std::uint16_t k = 0; k < count; ++k) {
        std::string name = r.str();
        const auto ranges = r.uint<std::uint32_t>();
        const auto azimuths = r.uint<std::uint32_t>();
        const auto bins = r.uint<std::uint32_t>();
        const auto n_base = r.uint<std::uint32_t>();
        if (static_cast<std::uint64_t>(ranges) * azimuths * bins > (1ull << 32) || n_base > 4096) {
            throw IoError("implausible record dimensions in " + path.string());
        }
        GeometryParams g;
        g.wavelength = r.f64();
        g.reference_range = r.f64();
        g.incidence_deg = r.f64();
        g.elevation_spacing = r.f64();
        g.elevation_origin = r.f64();
        g.range_spacing = r.f64();
        g.azimuth_spacing = r.f64();
        const double snr = r.f64();
        g.elevation_bins = static_cast<int>(bins);
        g.baselines.resize(n_base);
        for (auto& b : g.baselines) b = r.f64();
        TomoGeometry geom(g);

        EchoTensor e;
        e.ranges = ranges;
        e.azimuths = azimuths;
        e.snr_db = snr;
        e.geometry_id = geom.id();
        e.data.resize(n_base, static_cast<Eigen::Index>(ranges) * azimuths);
        for (Eigen::Index n = 0; n < e.data.rows(); ++n) {
            for (Eigen::Index c = 0; c < e.data.cols(); ++c) {
                const double re = r.f32();
                const double im = r.f32();
                e.data(n, c) = {re, im};
            }
        }
        ReflectivityVolume v(ranges, azimuths, bins);
        for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = r.f32();
        const auto n_pts = r.uint<std::uint32_t>();
        Eigen::Matrix3Xd pts(3, n_pts);
        Eigen::VectorXd amps(n_pts);
        for (Eigen::Index i = 0; i < pts.cols(); ++i) {
            for (int d = 0; d < 3; ++d) pts(d, i) = r.f32();
        }
        for (Eigen::Index i = 0; i < amps.size(); ++i) amps[i] = r.f32();
        records.push_back(DatasetRecord{std::move(name), geom, std::move(e), std::move(v),
                                        PointCloud::from_points(std::move(pts), std::move(amps))});
    }
    return records;
}

void write_volumes(const std::filesystem::path& path, const std::vector<NamedVolume>& volumes) {
    if (volumes.size() > 0xffffu) throw std::invalid_argument("write_volumes: too many volumes");
    Writer w(path);
    w.bytes("TSRV", 4);
    w.uint<std::uint16_t>(1);
    w.uint<std::uint16_t>(static_cast<std::uint16_t>(volumes.size()));
    for (const auto& nv : volumes) {
        w.str(nv.name);
        w.uint(static_cast<std::uint32_t>(nv.volume.ranges()));
        w.uint(static_cast<std::uint32_t>(nv.volume.azimuths()));
        w.uint(static_cast<std::uint32_t>(nv.volume.bins()));
        for (Eigen::Index i = 0; i < nv.volume.size(); ++i) w.f32(nv.volume.data()[i]);
    }
    w.close();
}

std::vector<NamedVolume> read_volumes(const std::filesystem::path& path) {
    Reader r(path);
    r.magic("TSRV");
    const auto version = r.uint<std::uint16_t>();
    if (version != 1) throw IoError("unsupported TSRV version in " + path.string());
    const auto count = r.uint<std::uint16_t>();
    std::vector<NamedVolume> out;
    for (std::uint16_t k = 0; k < count; ++k) {
        NamedVolume nv;
        nv.name = r.str();
        const auto ranges = r.uint<std::uint32_t>();
        const auto azimuths = r.uint<std::uint32_t>();
        const auto bins = r.uint<std::uint32_t>();
        if (static_cast<std::uint64_t>(ranges) * azimuths * bins > (1ull << 32)) {
            throw IoError("implausible volume dimensions in " + path.string());
        }
        nv.volume = ReflectivityVolume(ranges, azimuths, bins);
        for (Eigen::Index i = 0; i < nv.volume.size(); ++i) nv.volume.data()[i] = r.f32();
        out.push_back(std::move(nv));
    }
    return out;
}

}  // namespace tomo
