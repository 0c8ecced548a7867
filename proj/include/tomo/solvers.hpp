#pragma once

#include "tomo/geometry.hpp"
#include "tomo/simulator.hpp"
#include "tomo/volume.hpp"

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <vector>

namespace tomo {

template <typename Scalar>
using CVector = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;
template <typename Scalar>
using CMatrix = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

/// Complex soft threshold: shrinks the modulus by theta and keeps the phase.
/// Returns exactly zero when |z| <= theta (including z = 0).
template <typename Scalar>
std::complex<Scalar> soft_threshold(const std::complex<Scalar>& z, Scalar theta) {
    const Scalar m = std::abs(z);
    if (m <= theta) return {Scalar(0), Scalar(0)};
    return z * ((m - theta) / m);
}

template <typename Derived>
auto soft_threshold(const Eigen::MatrixBase<Derived>& z, typename Eigen::NumTraits<typename Derived::Scalar>::Real theta) {
    using C = typename Derived::Scalar;
    return z.unaryExpr([theta](const C& v) { return soft_threshold(v, theta); }).eval();
}

/// Largest squared singular value of A by power iteration on A^H A.
template <typename Scalar>
Scalar spectral_norm_sq(const CMatrix<Scalar>& A, int iterations = 50) {
    CVector<Scalar> v = CVector<Scalar>::Ones(A.cols());
    v.normalize();
    Scalar lambda = 0;
    for (int k = 0; k < iterations; ++k) {
        CVector<Scalar> w = A.adjoint() * (A * v);
        lambda = w.norm();
        if (lambda == Scalar(0)) return Scalar(0);
        v = w / lambda;
    }
    return lambda;
}

enum class SolverVariant { ista, fista };

struct SolverConfig {
    /// Step size; unset means 0.9 / sigma_max(A)^2.
    std::optional<double> step;
    /// L1 weight theta of 0.5 ||A x - g||^2 + theta ||x||_1. When
    /// `relative_threshold` is set the value is a fraction of max |A^H g|,
    /// resolved per column.
    double threshold = 0.05;
    bool relative_threshold = true;
    int max_iters = 1000;
    double stop_tol = 1e-6;
    SolverVariant variant = SolverVariant::fista;

    void validate() const {
        if (step && !(*step > 0.0)) throw std::invalid_argument("solver: step must be > 0");
        if (!(threshold >= 0.0)) throw std::invalid_argument("solver: threshold must be >= 0");
        if (max_iters < 1) throw std::invalid_argument("solver: max_iters must be >= 1");
        if (!(stop_tol >= 0.0)) throw std::invalid_argument("solver: stop_tol must be >= 0");
    }
};

template <typename Scalar>
struct SolveResult {
    CVector<Scalar> estimate;
    int iterations = 0;
};

/// 0.5 ||A x - g||^2 + theta ||x||_1
template <typename Scalar>
Scalar lasso_objective(const CVector<Scalar>& x, const CVector<Scalar>& g, const CMatrix<Scalar>& A, Scalar theta) {
    return Scalar(0.5) * (A * x - g).squaredNorm() + theta * x.cwiseAbs().sum();
}

namespace detail {

template <typename Scalar>
void require_finite(const CVector<Scalar>& g, const CMatrix<Scalar>& A) {
    if (!g.allFinite() || !A.allFinite()) throw std::invalid_argument("solver: non-finite input");
    if (g.size() != A.rows()) throw std::invalid_argument("solver: echo length does not match steering rows");
}

template <typename Scalar>
bool converged(const CVector<Scalar>& now, const CVector<Scalar>& before, double tol) {
    const Scalar change = (now - before).norm();
    const Scalar scale = now.norm();
    if (scale == Scalar(0)) return change == Scalar(0);
    return change / scale < tol;
}

}  // namespace detail

/// Proximal-gradient iterations x_k = h_{step*theta}(x_{k-1} - step A^H (A x_{k-1} - g))
/// from x_0 = 0. `objective`, when given, receives the objective after every iteration.
template <typename Scalar>
SolveResult<Scalar> ista_iterate(const CVector<Scalar>& g, const CMatrix<Scalar>& A, Scalar step, Scalar theta,
                                 int max_iters, double stop_tol, std::vector<Scalar>* objective = nullptr) {
    detail::require_finite(g, A);
    const Scalar shrink = step * theta;
    const CVector<Scalar> Ahg = A.adjoint() * g;
    const CMatrix<Scalar> gram = A.adjoint() * A;
    SolveResult<Scalar> res{CVector<Scalar>::Zero(A.cols()), 0};
    CVector<Scalar> prev(A.cols());
    for (int k = 1; k <= max_iters; ++k) {
        prev = res.estimate;
        res.estimate = soft_threshold(prev - step * (gram * prev - Ahg), shrink);
        res.iterations = k;
        if (objective) objective->push_back(lasso_objective(res.estimate, g, A, theta));
        if (detail::converged(res.estimate, prev, stop_tol)) break;
    }
    return res;
}

/// FISTA: the ISTA step taken at a Nesterov momentum point with
/// t_1 = 1, t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2.
template <typename Scalar>
SolveResult<Scalar> fista_iterate(const CVector<Scalar>& g, const CMatrix<Scalar>& A, Scalar step, Scalar theta,
                                  int max_iters, double stop_tol, std::vector<Scalar>* objective = nullptr) {
    detail::require_finite(g, A);
    const Scalar shrink = step * theta;
    const CVector<Scalar> Ahg = A.adjoint() * g;
    const CMatrix<Scalar> gram = A.adjoint() * A;
    SolveResult<Scalar> res{CVector<Scalar>::Zero(A.cols()), 0};
    CVector<Scalar> momentum = res.estimate;
    CVector<Scalar> prev(A.cols());
    Scalar t = 1;
    for (int k = 1; k <= max_iters; ++k) {
        prev = res.estimate;
        res.estimate = soft_threshold(momentum - step * (gram * momentum - Ahg), shrink);
        const Scalar t_next = (Scalar(1) + std::sqrt(Scalar(1) + Scalar(4) * t * t)) / Scalar(2);
        momentum = res.estimate + ((t - Scalar(1)) / t_next) * (res.estimate - prev);
        t = t_next;
        res.iterations = k;
        if (objective) objective->push_back(lasso_objective(res.estimate, g, A, theta));
        if (detail::converged(res.estimate, prev, stop_tol)) break;
    }
    return res;
}

/// Step used when the config leaves it unset.
double default_step(const Eigen::MatrixXcd& A);

/// L1 weight for one column under `cfg`.
double resolve_threshold(const Eigen::VectorXcd& g, const Eigen::MatrixXcd& A, const SolverConfig& cfg);

SolveResult<double> ista_reconstruct(const Eigen::VectorXcd& g, const SteeringMatrix& A, const SolverConfig& cfg);
SolveResult<double> fista_reconstruct(const Eigen::VectorXcd& g, const SteeringMatrix& A, const SolverConfig& cfg);

struct VolumeSolution {
    ComplexVolume complex;
    ReflectivityVolume magnitude;
    bool step_above_bound = false;  ///< step exceeded 1 / sigma_max(A)^2
};

/// Runs the configured solver independently on every (range, azimuth) column.
VolumeSolution solve_volume(const EchoTensor& echoes, const SteeringMatrix& A, const SolverConfig& cfg);

}  // namespace tomo
