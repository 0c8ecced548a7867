#pragma once

#include "tomo/geometry.hpp"
#include "tomo/volume.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <limits>
#include <vector>

namespace tomo {

enum class PrimitiveKind { cuboid, gabled, l_footprint };

/// Parametric building. Footprint is the axis-aligned rectangle
/// [x, x + width] x [y, y + depth] on the ground plane.
struct BuildingPrimitive {
    PrimitiveKind kind = PrimitiveKind::cuboid;
    Eigen::Vector2d position{0.0, 0.0};   ///< footprint min corner (x, y), m
    Eigen::Vector2d footprint{10.0, 10.0}; ///< (width along x, depth along y), m
    double height = 10.0;                  ///< wall / eave height, m
    double ridge_height = 0.0;             ///< gabled: ridge rise above the eaves, m
    Eigen::Vector2d cutout{0.0, 0.0};      ///< l_footprint: corner removed at (max x, max y), m
    double wall_reflectivity = 1.0;
    double roof_reflectivity = 0.7;

    double top_height() const { return kind == PrimitiveKind::gabled ? height + ridge_height : height; }
};

struct GroundPlane {
    bool enabled = true;
    double reflectivity = 0.3;
};

struct SceneModel {
    std::vector<BuildingPrimitive> primitives;
    GroundPlane ground;
    Eigen::Index ranges = 48;
    Eigen::Index azimuths = 48;
};

/// Throws std::invalid_argument when a primitive leaves the imaged grid
/// (footprint, layover extent or elevation) or carries negative values.
void validate_scene(const SceneModel& scene, const TomoGeometry& geom);

/// Planar parallelogram (or triangle when `triangle` is set) spanned by
/// edge_u and edge_v from origin; the outward normal is edge_u x edge_v.
struct Facet {
    Eigen::Vector3d origin;
    Eigen::Vector3d edge_u;
    Eigen::Vector3d edge_v;
    bool triangle = false;
    double reflectivity = 0.0;
    int primitive = -1;  ///< -1 for the ground plane

    Eigen::Vector3d normal() const { return edge_u.cross(edge_v).normalized(); }
    double area() const { return edge_u.cross(edge_v).norm() * (triangle ? 0.5 : 1.0); }
    /// Ray parameter t > t_min of the first hit, or +inf.
    double intersect(const Eigen::Vector3d& from, const Eigen::Vector3d& dir, double t_min) const;
};

std::vector<Facet> primitive_facets(const BuildingPrimitive& b, int index);
std::vector<Facet> scene_facets(const SceneModel& scene, const TomoGeometry& geom);

/// Unit vector from the scene towards the (far-field) sensor.
Eigen::Vector3d sensor_direction(const TomoGeometry& geom);

struct PointCloud {
    Eigen::Matrix3Xd points;
    Eigen::VectorXd amplitudes;
    std::vector<bool> visible;
    std::vector<int> source;  ///< primitive index per point, -1 for ground

    Eigen::Index size() const { return points.cols(); }
    bool empty() const { return points.cols() == 0; }
    std::size_t visible_count() const;
    std::size_t visible_count_from(int primitive) const;
    /// Copy holding only the visible points (all flagged visible).
    PointCloud visible_only() const;

    static PointCloud from_points(Eigen::Matrix3Xd points, Eigen::VectorXd amplitudes);
};

/// Stratified jittered sampling of every facet at `density` points per m^2,
/// followed by back-face and ray-cast occlusion tests along the sensor
/// direction. Each sample's amplitude is the facet reflectivity times the
/// facet area it represents.
PointCloud sample_point_cloud(const SceneModel& scene, const TomoGeometry& geom, double density,
                              std::uint64_t seed);

struct VoxelizeResult {
    ReflectivityVolume volume;
    std::size_t dropped = 0;
};

/// Nearest-bin additive accumulation of visible point amplitudes.
VoxelizeResult voxelize_ground_truth(const PointCloud& cloud, const TomoGeometry& geom, Eigen::Index ranges,
                                     Eigen::Index azimuths);

inline constexpr double noiseless = std::numeric_limits<double>::infinity();

struct EchoTensor {
    Eigen::MatrixXcd data;  ///< baselines x cells, cell = range * azimuths + azimuth
    Eigen::Index ranges = 0;
    Eigen::Index azimuths = 0;
    double snr_db = noiseless;
    std::uint64_t geometry_id = 0;

    Eigen::Index baselines() const { return data.rows(); }
    Eigen::Index cell(Eigen::Index r, Eigen::Index a) const { return r * azimuths + a; }
};

/// Coherent per-cell sum of visible scatterer responses at their continuous
/// elevation, plus circular white Gaussian noise scaled to `snr_db` relative
/// to the mean per-sample power of non-empty cells.
EchoTensor synthesize_echoes(const PointCloud& cloud, const TomoGeometry& geom, Eigen::Index ranges,
                             Eigen::Index azimuths, double snr_db, std::uint64_t seed);

/// Random building scenes with one to three primitives of mixed kinds.
std::vector<SceneModel> random_catalog(std::size_t count, Eigen::Index ranges, Eigen::Index azimuths,
                                       const TomoGeometry& geom, std::uint64_t seed);

/// Deterministic 64-bit seed derivation.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace tomo
