#include "tomo/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace tomo {

namespace {

constexpr double kRayEpsilon = 1e-6;

Facet quad(Eigen::Vector3d o, Eigen::Vector3d u, Eigen::Vector3d v, double refl, int prim) {
    return Facet{o, u, v, false, refl, prim};
}

Facet tri(Eigen::Vector3d o, Eigen::Vector3d u, Eigen::Vector3d v, double refl, int prim) {
    return Facet{o, u, v, true, refl, prim};
}

// Vertical walls along a counter-clockwise footprint polygon.
void extrude_walls(const std::vector<Eigen::Vector2d>& poly, double height, double refl, int prim,
                   std::vector<Facet>& out) {
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Eigen::Vector2d& a = poly[i];
        const Eigen::Vector2d& b = poly[(i + 1) % poly.size()];
        out.push_back(quad({a.x(), a.y(), 0.0}, {b.x() - a.x(), b.y() - a.y(), 0.0}, {0.0, 0.0, height}, refl, prim));
    }
}

Facet flat_roof(double x0, double y0, double x1, double y1, double z, double refl, int prim) {
    return quad({x0, y0, z}, {x1 - x0, 0.0, 0.0}, {0.0, y1 - y0, 0.0}, refl, prim);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double Facet::intersect(const Eigen::Vector3d& from, const Eigen::Vector3d& dir, double t_min) const {
    const Eigen::Vector3d p = dir.cross(edge_v);
    const double det = edge_u.dot(p);
    if (std::abs(det) < 1e-14) return std::numeric_limits<double>::infinity();
    const double inv = 1.0 / det;
    const Eigen::Vector3d tv = from - origin;
    const double a = tv.dot(p) * inv;
    if (a < 0.0 || a > 1.0) return std::numeric_limits<double>::infinity();
    const Eigen::Vector3d q = tv.cross(edge_u);
    const double b = dir.dot(q) * inv;
    if (b < 0.0 || b > 1.0 || (triangle && a + b > 1.0)) return std::numeric_limits<double>::infinity();
    const double t = edge_v.dot(q) * inv;
    return t > t_min ? t : std::numeric_limits<double>::infinity();
}

std::vector<Facet> primitive_facets(const BuildingPrimitive& b, int index) {
    const double x0 = b.position.x();
    const double y0 = b.position.y();
    const double x1 = x0 + b.footprint.x();
    const double y1 = y0 + b.footprint.y();
    const double wall = b.wall_reflectivity;
    const double roof = b.roof_reflectivity;
    std::vector<Facet> f;

    switch (b.kind) {
    case PrimitiveKind::cuboid:
        extrude_walls({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, b.height, wall, index, f);
        f.push_back(flat_roof(x0, y0, x1, y1, b.height, roof, index));
        break;
    case PrimitiveKind::l_footprint: {
        const double cx = x1 - b.cutout.x();
        const double cy = y1 - b.cutout.y();
        extrude_walls({{x0, y0}, {x1, y0}, {x1, cy}, {cx, cy}, {cx, y1}, {x0, y1}}, b.height, wall, index, f);
        f.push_back(flat_roof(x0, y0, cx, y1, b.height, roof, index));
        f.push_back(flat_roof(cx, y0, x1, cy, b.height, roof, index));
        break;
    }
    case PrimitiveKind::gabled: {
        // Ridge runs along x through the middle of the footprint.
        const double h = b.height;
        const double r = b.ridge_height;
        const double ym = 0.5 * (y0 + y1);
        const double w = x1 - x0;
        extrude_walls({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, h, wall, index, f);
        f.push_back(quad({x0, y1, h}, {0.0, ym - y1, r}, {w, 0.0, 0.0}, roof, index));
        f.push_back(quad({x0, y0, h}, {w, 0.0, 0.0}, {0.0, ym - y0, r}, roof, index));
        if (r > 0.0) {
            f.push_back(tri({x0, y1, h}, {0.0, y0 - y1, 0.0}, {0.0, ym - y1, r}, wall, index));
            f.push_back(tri({x1, y0, h}, {0.0, y1 - y0, 0.0}, {0.0, ym - y0, r}, wall, index));
        }
        break;
    }
    }
    return f;
}

std::vector<Facet> scene_facets(const SceneModel& scene, const TomoGeometry& geom) {
    std::vector<Facet> facets;
    for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
        auto f = primitive_facets(scene.primitives[i], static_cast<int>(i));
        facets.insert(facets.end(), f.begin(), f.end());
    }
    if (scene.ground.enabled) {
        const auto& p = geom.params();
        const double x0 = -0.5 * p.azimuth_spacing;
        const double y0 = -0.5 * p.range_spacing;
        const double x1 = (static_cast<double>(scene.azimuths) - 0.5) * p.azimuth_spacing;
        const double y1 = (static_cast<double>(scene.ranges) - 0.5) * p.range_spacing;
        facets.push_back(flat_roof(x0, y0, x1, y1, 0.0, scene.ground.reflectivity, -1));
    }
    return facets;
}

Eigen::Vector3d sensor_direction(const TomoGeometry& geom) {
    const double inc = geom.incidence_rad();
    return {0.0, std::sin(inc), std::cos(inc)};
}

void validate_scene(const SceneModel& scene, const TomoGeometry& geom) {
    if (scene.ranges < 1 || scene.azimuths < 1) throw std::invalid_argument("scene: dims must be >= 1");
    if (scene.ground.reflectivity < 0.0) throw std::invalid_argument("scene: negative ground reflectivity");
    const auto& p = geom.params();
    const double inc = geom.incidence_rad();
    const double x_lo = -0.5 * p.azimuth_spacing;
    const double x_hi = (static_cast<double>(scene.azimuths) - 0.5) * p.azimuth_spacing;
    const double y_lo = -0.5 * p.range_spacing;
    const double y_hi = (static_cast<double>(scene.ranges) - 0.5) * p.range_spacing;
    const double s_hi = geom.elevation_of_bin(static_cast<double>(geom.elevation_bins()) - 0.5);
    for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
        const auto& b = scene.primitives[i];
        const std::string tag = "scene: primitive " + std::to_string(i) + ": ";
        if (b.height < 0.0 || b.ridge_height < 0.0) throw std::invalid_argument(tag + "negative height");
        if (b.wall_reflectivity < 0.0 || b.roof_reflectivity < 0.0) {
            throw std::invalid_argument(tag + "negative reflectivity");
        }
        if (b.footprint.x() <= 0.0 || b.footprint.y() <= 0.0) throw std::invalid_argument(tag + "empty footprint");
        if (b.kind == PrimitiveKind::l_footprint &&
            (b.cutout.x() <= 0.0 || b.cutout.y() <= 0.0 || b.cutout.x() >= b.footprint.x() ||
             b.cutout.y() >= b.footprint.y())) {
            throw std::invalid_argument(tag + "cutout must lie strictly inside the footprint");
        }
        const double x0 = b.position.x();
        const double y0 = b.position.y();
        const double x1 = x0 + b.footprint.x();
        const double y1 = y0 + b.footprint.y();
        if (x0 < x_lo || x1 > x_hi || y0 < y_lo || y1 > y_hi) throw std::invalid_argument(tag + "footprint outside scene");
        const double top = b.top_height();
        if (y1 + top / std::tan(inc) > y_hi) throw std::invalid_argument(tag + "layover leaves the range extent");
        if (top / std::sin(inc) > s_hi) throw std::invalid_argument(tag + "taller than the elevation grid");
    }
}

std::size_t PointCloud::visible_count() const {
    return static_cast<std::size_t>(std::count(visible.begin(), visible.end(), true));
}

std::size_t PointCloud::visible_count_from(int primitive) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < visible.size(); ++i) n += (visible[i] && source[i] == primitive) ? 1 : 0;
    return n;
}

PointCloud PointCloud::visible_only() const {
    const auto n = static_cast<Eigen::Index>(visible_count());
    PointCloud out;
    out.points.resize(3, n);
    out.amplitudes.resize(n);
    out.visible.assign(static_cast<std::size_t>(n), true);
    out.source.resize(static_cast<std::size_t>(n));
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < size(); ++i) {
        if (!visible[static_cast<std::size_t>(i)]) continue;
        out.points.col(k) = points.col(i);
        out.amplitudes[k] = amplitudes[i];
        out.source[static_cast<std::size_t>(k)] = source[static_cast<std::size_t>(i)];
        ++k;
    }
    return out;
}

PointCloud PointCloud::from_points(Eigen::Matrix3Xd pts, Eigen::VectorXd amps) {
    if (amps.size() != pts.cols()) throw std::invalid_argument("PointCloud: amplitude count mismatch");
    PointCloud c;
    c.points = std::move(pts);
    c.amplitudes = std::move(amps);
    c.visible.assign(static_cast<std::size_t>(c.points.cols()), true);
    c.source.assign(static_cast<std::size_t>(c.points.cols()), -1);
    return c;
}

PointCloud sample_point_cloud(const SceneModel& scene, const TomoGeometry& geom, double density,
                              std::uint64_t seed) {
    if (!(density > 0.0)) throw std::invalid_argument("sample_point_cloud: density must be > 0");
    const auto facets = scene_facets(scene, geom);
    const Eigen::Vector3d toward_sensor = sensor_direction(geom);
    const double per_meter = std::sqrt(density);

    std::vector<Eigen::Vector3d> pts;
    std::vector<double> amps;
    std::vector<bool> vis;
    std::vector<int> src;

    std::vector<int> per_primitive_facet(scene.primitives.size() + 1, 0);
    for (std::size_t fi = 0; fi < facets.size(); ++fi) {
        const Facet& f = facets[fi];
        const int slot = f.primitive + 1;
        const int local = per_primitive_facet[static_cast<std::size_t>(slot)]++;
        const double area = f.area();
        if (area <= 1e-12) continue;

        // Streams depend only on (primitive, facet-within-primitive), so adding
        // primitives never perturbs existing samples.
        std::mt19937_64 rng(derive_seed(seed, (static_cast<std::uint64_t>(slot) << 16) | static_cast<std::uint64_t>(local)));
        std::uniform_real_distribution<double> jitter(0.0, 1.0);
        const int nu = std::max(1, static_cast<int>(std::lround(f.edge_u.norm() * per_meter)));
        const int nv = std::max(1, static_cast<int>(std::lround(f.edge_v.norm() * per_meter)));

        std::vector<Eigen::Vector3d> facet_pts;
        for (int i = 0; i < nu; ++i) {
            for (int j = 0; j < nv; ++j) {
                const double a = (i + jitter(rng)) / nu;
                const double b = (j + jitter(rng)) / nv;
                if (f.triangle && a + b > 1.0) continue;
                facet_pts.push_back(f.origin + a * f.edge_u + b * f.edge_v);
            }
        }
        if (facet_pts.empty()) continue;
        const double amp = f.reflectivity * area / static_cast<double>(facet_pts.size());
        const bool front_facing = f.normal().dot(toward_sensor) > 1e-12;

        for (const auto& p : facet_pts) {
            bool visible = front_facing;
            if (visible) {
                for (std::size_t gi = 0; gi < facets.size(); ++gi) {
                    if (gi == fi) continue;
                    if (std::isfinite(facets[gi].intersect(p, toward_sensor, kRayEpsilon))) {
                        visible = false;
                        break;
                    }
                }
            }
            pts.push_back(p);
            amps.push_back(amp);
            vis.push_back(visible);
            src.push_back(f.primitive);
        }
    }

    PointCloud cloud;
    cloud.points.resize(3, static_cast<Eigen::Index>(pts.size()));
    cloud.amplitudes.resize(static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        cloud.points.col(static_cast<Eigen::Index>(i)) = pts[i];
        cloud.amplitudes[static_cast<Eigen::Index>(i)] = amps[i];
    }
    cloud.visible = std::move(vis);
    cloud.source = std::move(src);
    return cloud;
}

namespace {

struct CellHit {
    Eigen::Index r, a, l;
    double s;
    bool inside;
};

CellHit locate(const TomoGeometry& geom, const Eigen::Vector3d& p, Eigen::Index ranges, Eigen::Index azimuths) {
    const Eigen::Vector3d c = xyz_to_cell(geom, p);
    const auto r = static_cast<Eigen::Index>(std::lround(c.x()));
    const auto a = static_cast<Eigen::Index>(std::lround(c.y()));
    const auto l = static_cast<Eigen::Index>(std::lround(geom.bin_of_elevation(c.z())));
    const bool inside = r >= 0 && r < ranges && a >= 0 && a < azimuths && l >= 0 && l < geom.elevation_bins();
    return {r, a, l, c.z(), inside};
}

}  // namespace

VoxelizeResult voxelize_ground_truth(const PointCloud& cloud, const TomoGeometry& geom, Eigen::Index ranges,
                                     Eigen::Index azimuths) {
    VoxelizeResult out{ReflectivityVolume(ranges, azimuths, geom.elevation_bins()), 0};
    for (Eigen::Index i = 0; i < cloud.size(); ++i) {
        if (!cloud.visible[static_cast<std::size_t>(i)]) continue;
        const CellHit h = locate(geom, cloud.points.col(i), ranges, azimuths);
        if (!h.inside) {
            ++out.dropped;
            continue;
        }
        out.volume(h.r, h.a, h.l) += cloud.amplitudes[i];
    }
    return out;
}

EchoTensor synthesize_echoes(const PointCloud& cloud, const TomoGeometry& geom, Eigen::Index ranges,
                             Eigen::Index azimuths, double snr_db, std::uint64_t seed) {
    const Eigen::Index n_base = geom.baseline_count();
    EchoTensor echoes;
    echoes.data = Eigen::MatrixXcd::Zero(n_base, ranges * azimuths);
    echoes.ranges = ranges;
    echoes.azimuths = azimuths;
    echoes.snr_db = snr_db;
    echoes.geometry_id = geom.id();

    for (Eigen::Index i = 0; i < cloud.size(); ++i) {
        if (!cloud.visible[static_cast<std::size_t>(i)]) continue;
        const CellHit h = locate(geom, cloud.points.col(i), ranges, azimuths);
        if (!h.inside) continue;
        auto g = echoes.data.col(echoes.cell(h.r, h.a));
        for (Eigen::Index n = 0; n < n_base; ++n) g[n] += std::polar(cloud.amplitudes[i], geom.phase(n, h.s));
    }

    if (std::isinf(snr_db) && snr_db > 0) return echoes;
    if (!std::isfinite(snr_db)) throw std::invalid_argument("synthesize_echoes: snr_db must be finite or +inf");

    double power = 0.0;
    Eigen::Index occupied = 0;
    for (Eigen::Index c = 0; c < echoes.data.cols(); ++c) {
        const double p = echoes.data.col(c).squaredNorm();
        if (p > 0.0) {
            power += p / static_cast<double>(n_base);
            ++occupied;
        }
    }
    if (occupied == 0) return echoes;
    power /= static_cast<double>(occupied);
    const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0) / 2.0);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (Eigen::Index c = 0; c < echoes.data.cols(); ++c) {
        for (Eigen::Index n = 0; n < n_base; ++n) {
            const double re = noise(rng);
            const double im = noise(rng);
            echoes.data(n, c) += std::complex<double>(re, im);
        }
    }
    return echoes;
}

std::vector<SceneModel> random_catalog(std::size_t count, Eigen::Index ranges, Eigen::Index azimuths,
                                       const TomoGeometry& geom, std::uint64_t seed) {
    const auto& p = geom.params();
    const double inc = geom.incidence_rad();
    const double x_extent = static_cast<double>(azimuths) * p.azimuth_spacing;
    const double y_far = (static_cast<double>(ranges) - 2.0) * p.range_spacing;
    const double top_by_grid = 0.9 * geom.elevation_of_bin(static_cast<double>(geom.elevation_bins()) - 1.0) * std::sin(inc);

    std::vector<SceneModel> scenes;
    scenes.reserve(count);
    for (std::size_t si = 0; si < count; ++si) {
        std::mt19937_64 rng(derive_seed(seed, 1000 + si));
        auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
        SceneModel scene;
        scene.ranges = ranges;
        scene.azimuths = azimuths;
        const int n_build = std::uniform_int_distribution<int>(1, 3)(rng);
        const double slot = x_extent / n_build;
        for (int bi = 0; bi < n_build; ++bi) {
            BuildingPrimitive b;
            b.kind = static_cast<PrimitiveKind>(std::uniform_int_distribution<int>(0, 2)(rng));
            const double width = std::max(3.0, uni(0.45, 0.8) * slot - 1.0);
            const double slack = std::max(0.0, slot - width - 1.0);
            b.position.x() = -0.5 * p.azimuth_spacing + bi * slot + 0.5 + uni(0.0, slack);
            const double depth = uni(0.15, 0.3) * ranges * p.range_spacing;
            b.position.y() = uni(0.05, 0.15) * ranges * p.range_spacing;
            b.footprint = {width, depth};
            const double y1 = b.position.y() + depth;
            const double top_by_range = (y_far - y1) * std::tan(inc);
            const double top_max = std::max(2.0, std::min(top_by_range, top_by_grid));
            const double top = uni(std::min(4.0, top_max) * 0.99, top_max);
            if (b.kind == PrimitiveKind::gabled) {
                b.height = 0.7 * top;
                b.ridge_height = 0.3 * top;
            } else {
                b.height = top;
            }
            if (b.kind == PrimitiveKind::l_footprint) b.cutout = {uni(0.3, 0.6) * width, uni(0.3, 0.6) * depth};
            scene.primitives.push_back(b);
        }
        validate_scene(scene, geom);
        scenes.push_back(std::move(scene));
    }
    return scenes;
}

}  // namespace tomo
