#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qsde/errors.hpp"
#include "qsde/linalg.hpp"
#include "qsde/parallel.hpp"
#include "qsde/rng.hpp"
#include "qsde/scheme.hpp"
#include "qsde/stats.hpp"

namespace qsde {

// Real SDE dX = b(t,X) dt + sigma(t,X) dW, carried on complex vectors with
// zero imaginary parts so the rest of the library shares one linalg layer.
struct SDEProblem {
    int dim = 0;
    int noise_dim = 0;
    std::function<Vec(double, const Vec&)> drift;
    std::function<Matrix(double, const Vec&)> drift_jacobian; // optional
    std::function<Matrix(double, const Vec&)> diffusion;      // dim x noise_dim
    // Constant Jacobian: the ensemble runner caches the step propagators.
    bool autonomous_linear = false;
};

// Central finite differences, h = 1e-6 * (1 + |x_j|) per component.
inline Matrix fd_jacobian(const SDEProblem& p, double t, const Vec& x) {
    Matrix jb(p.dim, p.dim);
    for (int j = 0; j < p.dim; ++j) {
        const double h = 1e-6 * (1.0 + std::abs(x[j]));
        Vec xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        const Vec bp = p.drift(t, xp);
        const Vec bm = p.drift(t, xm);
        for (int k = 0; k < p.dim; ++k) jb(k, j) = (bp[k] - bm[k]) / (2.0 * h);
    }
    return jb;
}

inline Matrix jacobian_of(const SDEProblem& p, double t, const Vec& x) {
    return p.drift_jacobian ? p.drift_jacobian(t, x) : fd_jacobian(p, t, x);
}

// Max entrywise gap between the supplied Jacobian and finite differences;
// a consistency self-test for user-provided derivatives.
inline double jacobian_consistency(const SDEProblem& p, double t, const Vec& x) {
    const Matrix a = p.drift_jacobian(t, x);
    const Matrix f = fd_jacobian(p, t, x);
    return (a - f).max_abs();
}

namespace detail {

inline void check_coeffs(const Vec& b, const Matrix& jb, const Matrix& sig, const char* where) {
    if (!is_finite(b) || !jb.is_finite() || !sig.is_finite())
        throw NumericalError(std::string(where) + ": non-finite coefficient evaluation");
}

// x + dt*(b - Jb x) + sqrt(dt)*sigma xi, the common Euler part of both steps.
inline Vec euler_part(const SDEProblem& p, double t, const Vec& x, double dt, const Vec& xi,
                      const Vec& b, const Matrix& jb, const char* where) {
    require(int(xi.size()) == p.noise_dim, "step: noise dimension mismatch");
    require(int(x.size()) == p.dim, "step: state dimension mismatch");
    if (dt <= 0.0) throw ConfigError("step: time step must be positive");
    const Matrix sig = p.diffusion(t, x);
    check_coeffs(b, jb, sig, where);
    const Vec jbx = jb * x;
    const Vec noise = sig * xi;
    Vec y(p.dim);
    const double sqdt = std::sqrt(dt);
    for (int k = 0; k < p.dim; ++k) y[k] = x[k] + dt * (b[k] - jbx[k]) + sqdt * noise[k];
    return y;
}

} // namespace detail

// Scheme 1: exp(Jb dt) applied to the Euler part.
inline Vec euler_exp_step(const SDEProblem& p, double t, const Vec& x, double dt, const Vec& xi) {
    const Vec b = p.drift(t, x);
    const Matrix jb = jacobian_of(p, t, x);
    const Vec y = detail::euler_part(p, t, x, dt, xi, b, jb, "euler_exp_step");
    return expm(jb * cx(dt)) * y;
}

// Implicit variant: (I - dt Jb)^{-1} replaces the exponential.
inline Vec implicit_exp_step(const SDEProblem& p, double t, const Vec& x, double dt,
                             const Vec& xi) {
    const Vec b = p.drift(t, x);
    const Matrix jb = jacobian_of(p, t, x);
    const Vec y = detail::euler_part(p, t, x, dt, xi, b, jb, "implicit_exp_step");
    return solve(Matrix::identity(p.dim) - jb * cx(dt), y);
}

struct WeakEstimate {
    double mean = 0.0;
    double ci_halfwidth = 0.0; // 90% batch-means interval
    std::int64_t trajectories = 0;
};

struct WeakOptions {
    int batches = 20;
    int workers = 1;
};

inline double richardson(double estimate_m, double estimate_2m) {
    return 2.0 * estimate_2m - estimate_m;
}

inline WeakEstimate richardson(const WeakEstimate& at_m, const WeakEstimate& at_2m) {
    return {richardson(at_m.mean, at_2m.mean), 2.0 * at_2m.ci_halfwidth + at_m.ci_halfwidth,
            std::min(at_m.trajectories, at_2m.trajectories)};
}

// Monte Carlo estimate of E f(X_T) over independent trajectories of the
// selected scheme. Per-trajectory streams are derived from (seed, index), and
// the reduction is fixed-order, so the result is independent of worker count.
inline WeakEstimate run_weak(const SDEProblem& p,
                             const std::function<Vec(const CounterRng&)>& sample_x0, double T,
                             int M, NoiseLaw law, Scheme scheme,
                             const std::function<double(const Vec&)>& payoff,
                             std::int64_t trajectories, std::uint64_t seed,
                             const WeakOptions& opts = {}) {
    if (M < 1) throw ConfigError("run_weak: need at least one step");
    if (trajectories < 2) throw ConfigError("run_weak: need at least two trajectories");
    if (scheme != Scheme::scheme1 && scheme != Scheme::implicit_v1)
        throw ConfigError("run_weak: scheme must be scheme1 or implicit_v1");
    if (trajectories % opts.batches != 0 || trajectories < 2 * opts.batches)
        throw ConfigError("run_weak: trajectory count must be a multiple of the batch count "
                          "and at least twice it");

    const double dt = T / double(M);
    const int n = p.noise_dim;

    // For constant Jacobians the propagator is state-independent; compute it
    // once instead of per step.
    Matrix cached_prop;
    Matrix cached_jb;
    if (p.autonomous_linear) {
        cached_jb = jacobian_of(p, 0.0, Vec(p.dim, 0.0));
        cached_prop = scheme == Scheme::scheme1
                          ? expm(cached_jb * cx(dt))
                          : LuFactor(Matrix::identity(p.dim) - cached_jb * cx(dt)).inverse();
    }

    std::vector<double> payoffs(std::size_t(trajectories), 0.0);
    parallel_for(trajectories, opts.workers, [&](std::int64_t i) {
        try {
            const CounterRng noise_rng(seed, trajectory_stream(std::uint64_t(i), 0));
            const CounterRng init_rng(seed, trajectory_stream(std::uint64_t(i), 1));
            Vec x = sample_x0(init_rng);
            require(int(x.size()) == p.dim, "run_weak: x0 dimension mismatch");
            Vec xi(std::size_t(n), cx(0.0));
            for (int m = 0; m < M; ++m) {
                const double t = dt * m;
                for (int k = 0; k < n; ++k)
                    xi[k] = law.sample(noise_rng, std::uint64_t(m) * n + k);
                if (p.autonomous_linear) {
                    const Vec b = p.drift(t, x);
                    const Vec y =
                        detail::euler_part(p, t, x, dt, xi, b, cached_jb, "run_weak step");
                    x = cached_prop * y;
                } else {
                    x = scheme == Scheme::scheme1 ? euler_exp_step(p, t, x, dt, xi)
                                                  : implicit_exp_step(p, t, x, dt, xi);
                }
                if (!is_finite(x)) throw NumericalError("trajectory left the finite range");
            }
            payoffs[std::size_t(i)] = payoff(x);
        } catch (const Error& e) {
            throw NumericalError("trajectory " + std::to_string(i) + ": " + e.what());
        }
    });

    WeakEstimate est;
    est.mean = kahan_mean(payoffs);
    est.ci_halfwidth = batch_means_ci(payoffs, opts.batches);
    est.trajectories = trajectories;
    return est;
}

} // namespace qsde
