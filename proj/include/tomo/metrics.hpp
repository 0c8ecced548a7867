#pragma once

#include "tomo/geometry.hpp"
#include "tomo/simulator.hpp"
#include "tomo/volume.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace tomo {

/// Static 3D kd-tree over the columns of a point matrix.
class KdTree {
public:
    explicit KdTree(Eigen::Matrix3Xd points);

    Eigen::Index size() const { return points_.cols(); }
    /// Index of the nearest point and its squared distance. Requires size() > 0.
    std::pair<Eigen::Index, double> nearest(const Eigen::Vector3d& q) const;

private:
    struct Node {
        Eigen::Index point;
        int axis;
        int left = -1;
        int right = -1;
    };

    int build(std::vector<Eigen::Index>& idx, std::size_t lo, std::size_t hi, int depth);
    void search(int node, const Eigen::Vector3d& q, Eigen::Index& best, double& best_d2) const;

    Eigen::Matrix3Xd points_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

/// Distance from every column of `from` to its nearest column of `to`.
Eigen::VectorXd nearest_distances(const Eigen::Matrix3Xd& from, const Eigen::Matrix3Xd& to);
/// O(n m) reference for nearest_distances.
Eigen::VectorXd nearest_distances_brute(const Eigen::Matrix3Xd& from, const Eigen::Matrix3Xd& to);

enum class MetricStatistic { mean, median, rms };

MetricStatistic parse_statistic(const std::string& s);
std::string to_string(MetricStatistic s);

struct MetricReport {
    double completeness = 0.0;           ///< truth -> reconstruction, m; +inf for an empty reconstruction
    std::optional<double> accuracy;      ///< reconstruction -> truth, m; empty for an empty reconstruction
    std::size_t reconstructed_points = 0;
    std::size_t truth_points = 0;
    double threshold = 0.0;              ///< tau_rel used for extraction (0 when not applicable)
};

/// Nearest-neighbor completeness and accuracy between two clouds. Every
/// point of both clouds takes part; pass visible_only() clouds as needed.
MetricReport completeness_accuracy(const PointCloud& reconstructed, const PointCloud& truth,
                                   MetricStatistic statistic = MetricStatistic::mean);

/// One point at the bin center of every voxel above tau_rel * max.
PointCloud extract_point_cloud(const ReflectivityVolume& volume, const TomoGeometry& geom, double tau_rel);

}  // namespace tomo
