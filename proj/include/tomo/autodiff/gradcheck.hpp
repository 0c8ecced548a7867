#pragma once

#include "tomo/autodiff/graph.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace tomo::ad {

struct GradCheckOptions {
    double step = 1e-6;
    double tolerance = 1e-4;
    /// Elements probed per parameter; larger tensors are sampled at random.
    Index max_elements = 256;
    std::uint64_t seed = 7;
};

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    Index worst_index = -1;
    double analytic = 0.0;
    double numeric = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;

    double max_rel_error() const;
    bool passed(double tol) const { return max_rel_error() < tol; }
    /// Throws std::runtime_error naming the worst parameter and index.
    void require(double tol) const;
};

/// Builds `fn` on a fresh graph, reduces a non-scalar output with fixed
/// random weights, and compares backward gradients of every parameter in
/// `params` against central differences. The relative error of an element
/// is |a - n| / max(|a|, |n|, 1e-3 * g, 1e-10) where g is the largest
/// analytic gradient magnitude over all of `params`.
GradCheckReport grad_check(const std::function<Var(Graph&)>& fn, const std::vector<Parameter*>& params,
                           const GradCheckOptions& opts = {});

}  // namespace tomo::ad
