#include "tomo/autodiff/gradcheck.hpp"

#include "tomo/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace tomo::ad {

double GradCheckReport::max_rel_error() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.max_rel_error);
    return m;
}

void GradCheckReport::require(double tol) const {
    for (const auto& e : entries) {
        if (!(e.max_rel_error < tol)) {
            throw std::runtime_error("grad_check failed for '" + e.name + "' at index " + std::to_string(e.worst_index) +
                                     ": analytic " + std::to_string(e.analytic) + " vs numeric " +
                                     std::to_string(e.numeric) + " (rel err " + std::to_string(e.max_rel_error) + ")");
        }
    }
}

GradCheckReport grad_check(const std::function<Var(Graph&)>& fn, const std::vector<Parameter*>& params,
                           const GradCheckOptions& opts) {
    Tensor weights;
    auto scalar_of = [&](Graph& g) {
        Var out = fn(g);
        if (out.value().size() == 1) return out;
        if (weights.empty()) {
            std::mt19937_64 rng(opts.seed);
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            weights = Tensor(out.shape());
            for (Index i = 0; i < weights.size(); ++i) weights[i] = u(rng);
        }
        return dot_const(out, weights);
    };
    auto evaluate = [&] {
        Graph g(false);
        return scalar_of(g).value().item();
    };

    std::vector<bool> was_trainable;
    for (Parameter* p : params) {
        was_trainable.push_back(p->trainable);
        p->trainable = true;
        p->zero_grad();
    }
    {
        Graph g(true);
        Var root = scalar_of(g);
        g.backward(root);
    }

    // Error floor relative to the largest analytic gradient across all
    // parameters, so tensors whose exact gradient vanishes (a bias feeding a
    // batch norm) are judged against round-off rather than against zero.
    double grad_max = 0.0;
    for (Parameter* p : params) grad_max = std::max(grad_max, p->grad.values().abs().maxCoeff());
    const double scale = std::max(1e-3 * grad_max, 1e-10);

    GradCheckReport report;
    std::mt19937_64 rng(opts.seed + 1);
    for (Parameter* p : params) {
        GradCheckEntry entry{p->name};
        const Index n = p->value.size();
        std::vector<Index> probe(static_cast<std::size_t>(n));
        std::iota(probe.begin(), probe.end(), Index{0});
        if (n > opts.max_elements) {
            std::shuffle(probe.begin(), probe.end(), rng);
            probe.resize(static_cast<std::size_t>(opts.max_elements));
        }
        for (Index i : probe) {
            const double orig = p->value[i];
            p->value[i] = orig + opts.step;
            const double fp = evaluate();
            p->value[i] = orig - opts.step;
            const double fm = evaluate();
            p->value[i] = orig;
            const double numeric = (fp - fm) / (2.0 * opts.step);
            const double analytic = p->grad[i];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), scale});
            const double rel = std::abs(analytic - numeric) / denom;
            if (entry.worst_index < 0 || rel > entry.max_rel_error) {
                entry.max_rel_error = rel;
                entry.worst_index = i;
                entry.analytic = analytic;
                entry.numeric = numeric;
            }
        }
        report.entries.push_back(entry);
    }
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->trainable = was_trainable[i];
    return report;
}

}  // namespace tomo::ad
