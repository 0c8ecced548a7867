#include "tomo/autodiff/tensor.hpp"

#include <stdexcept>

namespace tomo::ad {

std::string to_string(const Shape& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ", " : "") + std::to_string(s[i]);
    return out + ")";
}

Index element_count(const Shape& s) {
    Index n = 1;
    for (Index d : s) {
        if (d < 0) throw std::invalid_argument("negative tensor dimension in " + to_string(s));
        n *= d;
    }
    return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(Eigen::ArrayXd::Constant(element_count(shape_), fill)) {}

Tensor::Tensor(Shape shape, Eigen::ArrayXd values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (element_count(shape_) != values_.size()) {
        throw std::invalid_argument("tensor shape " + to_string(shape_) + " does not hold " +
                                    std::to_string(values_.size()) + " values");
    }
}

double Tensor::item() const {
    if (values_.size() != 1) throw std::logic_error("item() on tensor of shape " + to_string(shape_));
    return values_[0];
}

Eigen::Map<RowMatrix> Tensor::matrix() {
    if (rank() != 2) throw std::logic_error("matrix() on tensor of shape " + to_string(shape_));
    return {values_.data(), shape_[0], shape_[1]};
}

Eigen::Map<const RowMatrix> Tensor::matrix() const {
    if (rank() != 2) throw std::logic_error("matrix() on tensor of shape " + to_string(shape_));
    return {values_.data(), shape_[0], shape_[1]};
}

Tensor Tensor::reshaped(Shape shape) const {
    if (element_count(shape) != size()) {
        throw std::invalid_argument("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    }
    return Tensor(std::move(shape), values_);
}

}  // namespace tomo::ad
