#pragma once

#include <Eigen/Core>

#include <complex>
#include <stdexcept>
#include <string>

namespace tomo {

/// Dense (range, azimuth, elevation) grid stored range-major: the elevation
/// index runs fastest, then azimuth, then range.
template <typename Scalar>
class Volume {
public:
    using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

    Volume() = default;
    Volume(Eigen::Index ranges, Eigen::Index azimuths, Eigen::Index bins)
        : ranges_(ranges), azimuths_(azimuths), bins_(bins),
          data_(Storage::Zero(ranges * azimuths * bins)) {
        if (ranges < 0 || azimuths < 0 || bins < 0) {
            throw std::invalid_argument("Volume: negative dimension");
        }
    }

    Eigen::Index ranges() const { return ranges_; }
    Eigen::Index azimuths() const { return azimuths_; }
    Eigen::Index bins() const { return bins_; }
    Eigen::Index cells() const { return ranges_ * azimuths_; }
    Eigen::Index size() const { return data_.size(); }

    Eigen::Index offset(Eigen::Index r, Eigen::Index a, Eigen::Index l) const {
        return (r * azimuths_ + a) * bins_ + l;
    }

    Scalar& operator()(Eigen::Index r, Eigen::Index a, Eigen::Index l) { return data_[offset(r, a, l)]; }
    const Scalar& operator()(Eigen::Index r, Eigen::Index a, Eigen::Index l) const {
        return data_[offset(r, a, l)];
    }

    /// Elevation profile of one (range, azimuth) cell.
    auto column(Eigen::Index r, Eigen::Index a) { return data_.segment(offset(r, a, 0), bins_); }
    auto column(Eigen::Index r, Eigen::Index a) const { return data_.segment(offset(r, a, 0), bins_); }

    Storage& data() { return data_; }
    const Storage& data() const { return data_; }

    bool same_shape(const Volume& other) const {
        return ranges_ == other.ranges_ && azimuths_ == other.azimuths_ && bins_ == other.bins_;
    }

    std::string shape_string() const {
        return std::to_string(ranges_) + "x" + std::to_string(azimuths_) + "x" + std::to_string(bins_);
    }

private:
    Eigen::Index ranges_ = 0;
    Eigen::Index azimuths_ = 0;
    Eigen::Index bins_ = 0;
    Storage data_;
};

/// Nonnegative real reflectivity: ground truth and reconstructed magnitudes.
using ReflectivityVolume = Volume<double>;
using ComplexVolume = Volume<std::complex<double>>;

template <typename Scalar>
Volume<typename Eigen::NumTraits<Scalar>::Real> magnitude(const Volume<Scalar>& v) {
    Volume<typename Eigen::NumTraits<Scalar>::Real> out(v.ranges(), v.azimuths(), v.bins());
    out.data() = v.data().abs();
    return out;
}

}  // namespace tomo
