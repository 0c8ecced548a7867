#pragma once

#include "tomo/autodiff/graph.hpp"

#include <memory>
#include <vector>

namespace tomo::ad {

// Elementwise (identical shapes).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var relu(const Var& a);
/// log(1 + exp(x))
Var softplus(const Var& a);
/// Elementwise max; ties route the gradient to `a`.
Var maximum(const Var& a, const Var& b);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(double c, const Var& a) { return scale(a, c); }

Var sum(const Var& a);
Var mean(const Var& a);
/// Mean of squared differences.
Var mse(const Var& a, const Var& b);
/// Mean absolute value; the subgradient at zero is zero.
Var mean_abs(const Var& a);
/// Scalar weighted sum: sum_i w_i a_i.
Var dot_const(const Var& a, const Tensor& w);

/// Rank-2 row-major product.
Var matmul(const Var& a, const Var& b);

using IndexMap = std::shared_ptr<const std::vector<Index>>;

/// out[i] = in[map[i]] (flat offsets), or 0 where map[i] < 0. Reshapes,
/// permutations, reflect padding and crops are all gathers; backward
/// scatter-adds, so duplicated sources collect every contribution.
Var gather(const Var& a, IndexMap map, Shape out_shape);

/// Complex quantities as (real, imaginary) pairs of identically shaped tensors.
struct CVar {
    Var re;
    Var im;
};

CVar complex_add(const CVar& a, const CVar& b);
/// (Wr + jWi)(Xr + jXi) from four real products.
CVar complex_matmul(const CVar& w, const CVar& x);
/// z * max(m - theta, 0) / m with m = sqrt(|z|^2 + eps); theta is a scalar Var.
/// eps = 0 gives the exact soft threshold.
CVar complex_soft_threshold(const CVar& z, const Var& theta, double eps);
/// |z|, with zero gradient at the origin.
Var magnitude(const CVar& z);

}  // namespace tomo::ad
