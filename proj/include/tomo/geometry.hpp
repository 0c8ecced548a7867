#pragma once

#include <Eigen/Core>

#include <complex>
#include <cstdint>
#include <vector>

namespace tomo {

/// Raw acquisition parameters. Defaults describe an 11-pass X-band stack
/// with baselines spread uniformly over [0, 1.9896] m.
struct GeometryParams {
    std::vector<double> baselines = uniform_baselines(11, 1.9896);
    double wavelength = 0.031;          ///< m
    double reference_range = 2040.3406; ///< R0, m
    double incidence_deg = 31.6453;
    int elevation_bins = 128;
    double elevation_spacing = 1.0;     ///< m
    double elevation_origin = 0.0;      ///< s of bin 0, m
    double range_spacing = 1.0;         ///< ground-range cell size, m
    double azimuth_spacing = 1.0;       ///< m

    static std::vector<double> uniform_baselines(int count, double span);
};

/// Validated, immutable acquisition geometry.
///
/// Coordinate frame: x runs along azimuth, y along ground range and z up.
/// The sensor looks down towards -y, so the unit vector pointing at the sensor
/// is (0, sin(inc), cos(inc)). Elevation s is measured perpendicular to the
/// line of sight in the incidence plane along (0, -cos(inc), sin(inc)); a
/// point at elevation s in range cell r therefore sits at
///   y = r * range_spacing - s * cos(inc),   z = s * sin(inc),
/// which keeps every point of the cell at the same slant range as the ground
/// point (r * range_spacing, 0).
class TomoGeometry {
public:
    explicit TomoGeometry(GeometryParams params = {});

    const GeometryParams& params() const { return p_; }
    Eigen::Index baseline_count() const { return static_cast<Eigen::Index>(p_.baselines.size()); }
    Eigen::Index elevation_bins() const { return p_.elevation_bins; }
    double incidence_rad() const;

    /// Elevation of grid bin l (may be fractional).
    double elevation_of_bin(double l) const { return p_.elevation_origin + l * p_.elevation_spacing; }
    /// Continuous bin coordinate of elevation s.
    double bin_of_elevation(double s) const { return (s - p_.elevation_origin) / p_.elevation_spacing; }

    /// Interferometric phase of baseline n for a scatterer at elevation s.
    double phase(Eigen::Index n, double s) const;

    /// Stable identifier derived from every parameter bit.
    std::uint64_t id() const { return id_; }

    bool operator==(const TomoGeometry& other) const;

private:
    GeometryParams p_;
    std::uint64_t id_ = 0;
};

struct SteeringMatrix {
    Eigen::MatrixXcd entries;   ///< N x L
    std::uint64_t geometry_id = 0;
};

/// A[n, l] = exp(-j 4 pi b_n s_l / (lambda R0)).
SteeringMatrix build_steering_matrix(const TomoGeometry& geom);

Eigen::Vector3d elevation_to_xyz(const TomoGeometry& geom, double range_idx, double azimuth_idx, double s);

/// Inverse of elevation_to_xyz: continuous (range index, azimuth index, elevation).
Eigen::Vector3d xyz_to_cell(const TomoGeometry& geom, const Eigen::Vector3d& p);

/// lambda R0 / (2 * total baseline span)
double rayleigh_resolution(const TomoGeometry& geom);
/// lambda R0 / (2 * largest adjacent baseline gap)
double unambiguous_extent(const TomoGeometry& geom);

}  // namespace tomo
