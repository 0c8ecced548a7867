#include "tomo/geometry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tomo {

namespace {

double max_adjacent_gap(std::vector<double> b) {
    std::sort(b.begin(), b.end());
    double gap = 0.0;
    for (std::size_t i = 1; i < b.size(); ++i) gap = std::max(gap, b[i] - b[i - 1]);
    return gap;
}

double total_span(const std::vector<double>& b) {
    auto [lo, hi] = std::minmax_element(b.begin(), b.end());
    return *hi - *lo;
}

std::uint64_t fnv_mix(std::uint64_t h, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xffu;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace

std::vector<double> GeometryParams::uniform_baselines(int count, double span) {
    std::vector<double> b(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i) b[i] = count > 1 ? span * i / (count - 1) : 0.0;
    return b;
}

TomoGeometry::TomoGeometry(GeometryParams params) : p_(std::move(params)) {
    if (p_.baselines.size() < 2) throw std::invalid_argument("geometry: need at least 2 baselines");
    if (p_.elevation_bins < 2) throw std::invalid_argument("geometry: need at least 2 elevation bins");
    if (!(p_.elevation_spacing > 0.0)) throw std::invalid_argument("geometry: elevation_spacing must be > 0");
    if (!(p_.reference_range > 0.0)) throw std::invalid_argument("geometry: reference_range must be > 0");
    if (!(p_.wavelength > 0.0)) throw std::invalid_argument("geometry: wavelength must be > 0");
    if (!(p_.incidence_deg > 0.0 && p_.incidence_deg < 90.0)) {
        throw std::invalid_argument("geometry: incidence_deg must lie in (0, 90)");
    }
    if (!(p_.range_spacing > 0.0) || !(p_.azimuth_spacing > 0.0)) {
        throw std::invalid_argument("geometry: cell spacings must be > 0");
    }
    for (double b : p_.baselines) {
        if (!std::isfinite(b)) throw std::invalid_argument("geometry: non-finite baseline");
    }
    const double gap = max_adjacent_gap(p_.baselines);
    if (!(gap > 0.0)) throw std::invalid_argument("geometry: baselines must not all coincide");
    const double extent = p_.wavelength * p_.reference_range / (2.0 * gap);
    const double span = p_.elevation_bins * p_.elevation_spacing;
    if (span > extent) {
        throw std::invalid_argument("geometry: elevation span " + std::to_string(span) +
                                    " m exceeds unambiguous extent " + std::to_string(extent) + " m");
    }

    std::uint64_t h = 0xcbf29ce484222325ull;
    for (double b : p_.baselines) h = fnv_mix(h, b);
    for (double v : {p_.wavelength, p_.reference_range, p_.incidence_deg, double(p_.elevation_bins),
                     p_.elevation_spacing, p_.elevation_origin, p_.range_spacing, p_.azimuth_spacing}) {
        h = fnv_mix(h, v);
    }
    id_ = h;
}

double TomoGeometry::incidence_rad() const { return p_.incidence_deg * std::numbers::pi / 180.0; }

double TomoGeometry::phase(Eigen::Index n, double s) const {
    return -4.0 * std::numbers::pi * p_.baselines[static_cast<std::size_t>(n)] * s /
           (p_.wavelength * p_.reference_range);
}

bool TomoGeometry::operator==(const TomoGeometry& other) const {
    const auto& a = p_;
    const auto& b = other.p_;
    return a.baselines == b.baselines && a.wavelength == b.wavelength &&
           a.reference_range == b.reference_range && a.incidence_deg == b.incidence_deg &&
           a.elevation_bins == b.elevation_bins && a.elevation_spacing == b.elevation_spacing &&
           a.elevation_origin == b.elevation_origin && a.range_spacing == b.range_spacing &&
           a.azimuth_spacing == b.azimuth_spacing;
}

SteeringMatrix build_steering_matrix(const TomoGeometry& geom) {
    const Eigen::Index n_rows = geom.baseline_count();
    const Eigen::Index n_cols = geom.elevation_bins();
    SteeringMatrix A{Eigen::MatrixXcd(n_rows, n_cols), geom.id()};
    for (Eigen::Index l = 0; l < n_cols; ++l) {
        const double s = geom.elevation_of_bin(static_cast<double>(l));
        for (Eigen::Index n = 0; n < n_rows; ++n) A.entries(n, l) = std::polar(1.0, geom.phase(n, s));
    }
    return A;
}

Eigen::Vector3d elevation_to_xyz(const TomoGeometry& geom, double range_idx, double azimuth_idx, double s) {
    const auto& p = geom.params();
    const double inc = geom.incidence_rad();
    return {azimuth_idx * p.azimuth_spacing, range_idx * p.range_spacing - s * std::cos(inc), s * std::sin(inc)};
}

Eigen::Vector3d xyz_to_cell(const TomoGeometry& geom, const Eigen::Vector3d& p) {
    const auto& g = geom.params();
    const double inc = geom.incidence_rad();
    const double s = p.z() / std::sin(inc);
    const double ground_range = p.y() + s * std::cos(inc);
    return {ground_range / g.range_spacing, p.x() / g.azimuth_spacing, s};
}

double rayleigh_resolution(const TomoGeometry& geom) {
    const auto& p = geom.params();
    return p.wavelength * p.reference_range / (2.0 * total_span(p.baselines));
}

double unambiguous_extent(const TomoGeometry& geom) {
    const auto& p = geom.params();
    return p.wavelength * p.reference_range / (2.0 * max_adjacent_gap(p.baselines));
}

}  // namespace tomo
