#pragma once

#include <Eigen/Core>

#include <initializer_list>
#include <string>
#include <vector>

namespace tomo::ad {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string to_string(const Shape& s);
Index element_count(const Shape& s);

/// Dense row-major f64 array of rank 0..4. Image batches use (N, C, H, W).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, Eigen::ArrayXd values);

    static Tensor scalar(double v) { return Tensor({}, Eigen::ArrayXd::Constant(1, v)); }
    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    Index dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    Index size() const { return values_.size(); }
    bool empty() const { return values_.size() == 0; }

    Eigen::ArrayXd& values() { return values_; }
    const Eigen::ArrayXd& values() const { return values_; }
    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    double& operator[](Index i) { return values_[i]; }
    double operator[](Index i) const { return values_[i]; }
    double item() const;

    /// Rank-2 row-major view.
    Eigen::Map<RowMatrix> matrix();
    Eigen::Map<const RowMatrix> matrix() const;

    Tensor reshaped(Shape shape) const;
    void release() { values_ = Eigen::ArrayXd(); }

private:
    Shape shape_;
    Eigen::ArrayXd values_;
};

/// Named learnable (or buffered) state owned by a network module.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;  ///< false for buffers such as batch-norm running statistics
    bool frozen = false;    ///< excluded from optimizer updates

    Parameter() = default;
    Parameter(std::string n, Tensor v, bool train = true)
        : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros_like(value)), trainable(train) {}

    void zero_grad() { grad = Tensor::zeros_like(value); }
};

}  // namespace tomo::ad
