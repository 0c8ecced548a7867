#pragma once

#include "tomo/geometry.hpp"
#include "tomo/simulator.hpp"
#include "tomo/volume.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace tomo {

/// Raised for any container read/write failure; the message names the path.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DatasetRecord {
    std::string name;
    TomoGeometry geometry;
    EchoTensor echoes;
    ReflectivityVolume truth;
    PointCloud cloud;  ///< visible scatterers only
};

struct SimulationOptions {
    double density = 4.0;   ///< samples per m^2
    double snr_db = 20.0;
    std::uint64_t seed = 1;
};

struct DatasetSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

/// Validation and test sets each take round(n / 6) records (at least one when
/// n >= 3), taken from the end of the record order; 12 records split 8/2/2.
DatasetSplit split_indices(std::size_t n);

/// Rounds every stored tensor to f32 precision, the precision of the container.
void quantize_to_f32(DatasetRecord& record);

/// Simulates one record per scene. Scenes run in parallel with per-scene seeds.
std::vector<DatasetRecord> simulate_records(const std::vector<SceneModel>& catalog, const TomoGeometry& geom,
                                            const SimulationOptions& opts);

/// Simulates the catalog and writes the container plus a `<path>.split.json`
/// sidecar listing the split indices.
std::vector<DatasetRecord> generate_dataset(const std::vector<SceneModel>& catalog, const TomoGeometry& geom,
                                            const SimulationOptions& opts, const std::filesystem::path& path);

// TSRD container, little-endian:
//   "TSRD" | u16 version (1) | u16 record count
//   per record:
//     u32 name length | UTF-8 name
//     u32 ranges | u32 azimuths | u32 elevation bins | u32 baseline count N
//     f64 wavelength, reference_range, incidence_deg, elevation_spacing,
//         elevation_origin, range_spacing, azimuth_spacing, snr_db, baselines[N]
//     echoes: f32 (re, im) pairs, baseline-major (baseline, range, azimuth)
//     truth volume: f32, range-major (range, azimuth, elevation)
//     cloud: u32 count | f32 (x, y, z) * count | f32 amplitude * count
void write_dataset(const std::filesystem::path& path, const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path);

struct NamedVolume {
    std::string name;
    ReflectivityVolume volume;
};

// Standalone volume file:
//   "TSRV" | u16 version (1) | u16 count
//   per volume: u32 name length | name | u32 ranges, azimuths, bins | f32 data (range-major)
void write_volumes(const std::filesystem::path& path, const std::vector<NamedVolume>& volumes);
std::vector<NamedVolume> read_volumes(const std::filesystem::path& path);

}  // namespace tomo
