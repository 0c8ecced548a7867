#include "tomo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace tomo {

using Eigen::Index;

KdTree::KdTree(Eigen::Matrix3Xd points) : points_(std::move(points)) {
    std::vector<Index> idx(static_cast<std::size_t>(points_.cols()));
    std::iota(idx.begin(), idx.end(), Index{0});
    nodes_.reserve(idx.size());
    root_ = build(idx, 0, idx.size(), 0);
}

int KdTree::build(std::vector<Index>& idx, std::size_t lo, std::size_t hi, int depth) {
    if (lo >= hi) return -1;
    const int axis = depth % 3;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(idx.begin() + static_cast<std::ptrdiff_t>(lo), idx.begin() + static_cast<std::ptrdiff_t>(mid),
                     idx.begin() + static_cast<std::ptrdiff_t>(hi),
                     [&](Index a, Index b) { return points_(axis, a) < points_(axis, b); });
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({idx[mid], axis});
    const int left = build(idx, lo, mid, depth + 1);
    const int right = build(idx, mid + 1, hi, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
}

void KdTree::search(int node, const Eigen::Vector3d& q, Index& best, double& best_d2) const {
    if (node < 0) return;
    const Node& n = nodes_[static_cast<std::size_t>(node)];
    const double d2 = (points_.col(n.point) - q).squaredNorm();
    if (d2 < best_d2 || (d2 == best_d2 && n.point < best)) {
        best_d2 = d2;
        best = n.point;
    }
    const double diff = q[n.axis] - points_(n.axis, n.point);
    const int near = diff < 0 ? n.left : n.right;
    const int far = diff < 0 ? n.right : n.left;
    search(near, q, best, best_d2);
    // Slack keeps the pruning conservative under rounding.
    if (diff * diff <= best_d2 * (1.0 + 1e-12)) search(far, q, best, best_d2);
}

std::pair<Index, double> KdTree::nearest(const Eigen::Vector3d& q) const {
    if (root_ < 0) throw std::logic_error("KdTree::nearest on an empty tree");
    Index best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    search(root_, q, best, best_d2);
    return {best, best_d2};
}

Eigen::VectorXd nearest_distances(const Eigen::Matrix3Xd& from, const Eigen::Matrix3Xd& to) {
    if (to.cols() == 0) throw std::invalid_argument("nearest_distances: empty target cloud");
    const KdTree tree(to);
    Eigen::VectorXd d(from.cols());
    for (Index i = 0; i < from.cols(); ++i) d[i] = std::sqrt(tree.nearest(from.col(i)).second);
    return d;
}

Eigen::VectorXd nearest_distances_brute(const Eigen::Matrix3Xd& from, const Eigen::Matrix3Xd& to) {
    if (to.cols() == 0) throw std::invalid_argument("nearest_distances: empty target cloud");
    Eigen::VectorXd d(from.cols());
    for (Index i = 0; i < from.cols(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < to.cols(); ++j) best = std::min(best, (to.col(j) - from.col(i)).squaredNorm());
        d[i] = std::sqrt(best);
    }
    return d;
}

MetricStatistic parse_statistic(const std::string& s) {
    if (s == "mean") return MetricStatistic::mean;
    if (s == "median") return MetricStatistic::median;
    if (s == "rms") return MetricStatistic::rms;
    throw std::invalid_argument("unknown metric statistic '" + s + "' (mean, median, rms)");
}

std::string to_string(MetricStatistic s) {
    switch (s) {
        case MetricStatistic::mean: return "mean";
        case MetricStatistic::median: return "median";
        case MetricStatistic::rms: return "rms";
    }
    return "mean";
}

namespace {

double reduce(Eigen::VectorXd d, MetricStatistic s) {
    switch (s) {
        case MetricStatistic::mean: return d.mean();
        case MetricStatistic::rms: return std::sqrt(d.squaredNorm() / static_cast<double>(d.size()));
        case MetricStatistic::median: {
            std::sort(d.begin(), d.end());
            const Index n = d.size();
            return n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
        }
    }
    return d.mean();
}

}  // namespace

MetricReport completeness_accuracy(const PointCloud& reconstructed, const PointCloud& truth, MetricStatistic statistic) {
    if (truth.empty()) throw std::invalid_argument("completeness_accuracy: empty truth cloud");
    MetricReport r;
    r.truth_points = static_cast<std::size_t>(truth.size());
    r.reconstructed_points = static_cast<std::size_t>(reconstructed.size());
    if (reconstructed.empty()) {
        r.completeness = std::numeric_limits<double>::infinity();
        return r;
    }
    r.completeness = reduce(nearest_distances(truth.points, reconstructed.points), statistic);
    r.accuracy = reduce(nearest_distances(reconstructed.points, truth.points), statistic);
    return r;
}

PointCloud extract_point_cloud(const ReflectivityVolume& volume, const TomoGeometry& geom, double tau_rel) {
    if (!(tau_rel > 0.0 && tau_rel < 1.0)) throw std::invalid_argument("extract_point_cloud: tau_rel must lie in (0, 1)");
    if (volume.bins() != geom.elevation_bins()) {
        throw std::invalid_argument("extract_point_cloud: volume has " + std::to_string(volume.bins()) +
                                    " elevation bins, geometry " + std::to_string(geom.elevation_bins()));
    }
    const double peak = volume.size() ? volume.data().maxCoeff() : 0.0;
    if (!(peak > 0.0)) return PointCloud::from_points(Eigen::Matrix3Xd(3, 0), Eigen::VectorXd(0));
    const double cut = tau_rel * peak;
    std::vector<Eigen::Vector3d> pts;
    std::vector<double> amps;
    for (Index r = 0; r < volume.ranges(); ++r) {
        for (Index a = 0; a < volume.azimuths(); ++a) {
            for (Index l = 0; l < volume.bins(); ++l) {
                const double v = volume(r, a, l);
                if (v > cut) {
                    pts.push_back(elevation_to_xyz(geom, static_cast<double>(r), static_cast<double>(a),
                                                   geom.elevation_of_bin(static_cast<double>(l))));
                    amps.push_back(v);
                }
            }
        }
    }
    Eigen::Matrix3Xd p(3, static_cast<Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) p.col(static_cast<Index>(i)) = pts[i];
    return PointCloud::from_points(std::move(p), Eigen::Map<Eigen::VectorXd>(amps.data(), static_cast<Index>(amps.size())));
}

}  // namespace tomo
