#include "tomo/solvers.hpp"

#include "tomo/parallel.hpp"

#include <string>

namespace tomo {

double default_step(const Eigen::MatrixXcd& A) { return 0.9 / spectral_norm_sq<double>(A); }

double resolve_threshold(const Eigen::VectorXcd& g, const Eigen::MatrixXcd& A, const SolverConfig& cfg) {
    if (!cfg.relative_threshold) return cfg.threshold;
    return cfg.threshold * (A.adjoint() * g).cwiseAbs().maxCoeff();
}

namespace {

SolveResult<double> run(const Eigen::VectorXcd& g, const Eigen::MatrixXcd& A, const SolverConfig& cfg, double step,
                        SolverVariant variant) {
    const double theta = resolve_threshold(g, A, cfg);
    if (variant == SolverVariant::ista) return ista_iterate<double>(g, A, step, theta, cfg.max_iters, cfg.stop_tol);
    return fista_iterate<double>(g, A, step, theta, cfg.max_iters, cfg.stop_tol);
}

}  // namespace

SolveResult<double> ista_reconstruct(const Eigen::VectorXcd& g, const SteeringMatrix& A, const SolverConfig& cfg) {
    cfg.validate();
    return run(g, A.entries, cfg, cfg.step.value_or(default_step(A.entries)), SolverVariant::ista);
}

SolveResult<double> fista_reconstruct(const Eigen::VectorXcd& g, const SteeringMatrix& A, const SolverConfig& cfg) {
    cfg.validate();
    return run(g, A.entries, cfg, cfg.step.value_or(default_step(A.entries)), SolverVariant::fista);
}

VolumeSolution solve_volume(const EchoTensor& echoes, const SteeringMatrix& A, const SolverConfig& cfg) {
    cfg.validate();
    if (echoes.baselines() != A.entries.rows()) {
        throw std::invalid_argument("solve_volume: echo baselines (" + std::to_string(echoes.baselines()) +
                                    ") do not match steering rows (" + std::to_string(A.entries.rows()) + ")");
    }
    const double sigma_sq = spectral_norm_sq<double>(A.entries);
    const double bound = 1.0 / sigma_sq;
    const double step = cfg.step.value_or(0.9 / sigma_sq);
    const Eigen::Index bins = A.entries.cols();
    VolumeSolution out{ComplexVolume(echoes.ranges, echoes.azimuths, bins),
                       ReflectivityVolume(echoes.ranges, echoes.azimuths, bins), step > bound};

    parallel_for(echoes.ranges * echoes.azimuths, [&](std::ptrdiff_t cell) {
        const Eigen::Index r = cell / echoes.azimuths;
        const Eigen::Index a = cell % echoes.azimuths;
        try {
            const auto res = run(echoes.data.col(cell), A.entries, cfg, step, cfg.variant);
            out.complex.column(r, a) = res.estimate.array();
            out.magnitude.column(r, a) = res.estimate.array().abs();
        } catch (const std::exception& e) {
            throw std::runtime_error("solve_volume: cell (range " + std::to_string(r) + ", azimuth " +
                                     std::to_string(a) + "): " + e.what());
        }
    });
    return out;
}

}  // namespace tomo
