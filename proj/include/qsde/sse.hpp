#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "qsde/errors.hpp"
#include "qsde/linalg.hpp"
#include "qsde/rng.hpp"
#include "qsde/scheme.hpp"

namespace qsde {

// Problem data for the nonlinear stochastic Schroedinger equation
//   dZ = (G Z + D(Z)) dt + sum_k E_k(Z) dW^k,   G = -iH - 1/2 sum_k L_k^* L_k,
// together with the observable whose mean E<Z, A Z> is being estimated.
struct SSEProblem {
    int dim = 0;
    Matrix H;
    std::vector<Matrix> lindblads;
    Matrix observable;
    Vec z0;
    Matrix G; // derived from H and the Lindblad operators
};

inline Matrix assemble_G(const Matrix& H, const std::vector<Matrix>& lindblads) {
    Matrix g = H * cx(0.0, -1.0);
    for (const Matrix& l : lindblads) g -= (l.adjoint() * l) * cx(0.5);
    return g;
}

inline SSEProblem make_sse_problem(Matrix H, std::vector<Matrix> lindblads, Matrix observable,
                                   Vec z0) {
    SSEProblem p;
    p.dim = H.rows();
    require(H.rows() == H.cols(), "SSEProblem: H must be square");
    require(observable.rows() == p.dim && observable.cols() == p.dim,
            "SSEProblem: observable dimension mismatch");
    require(int(z0.size()) == p.dim, "SSEProblem: z0 dimension mismatch");
    for (const Matrix& l : lindblads)
        require(l.rows() == p.dim && l.cols() == p.dim, "SSEProblem: Lindblad dimension mismatch");
    if ((H - H.adjoint()).max_abs() > 1e-12)
        throw ConfigError("SSEProblem: H is not self-adjoint (tolerance 1e-12)");
    if (std::abs(norm(z0) - 1.0) > 1e-12)
        throw ConfigError("SSEProblem: z0 is not a unit vector (tolerance 1e-12)");
    p.G = assemble_G(H, lindblads);
    p.H = std::move(H);
    p.lindblads = std::move(lindblads);
    p.observable = std::move(observable);
    p.z0 = std::move(z0);
    return p;
}

namespace detail {

struct SseCoeffs {
    Vec drift;                   // D(z)
    std::vector<Vec> diffusions; // E_k(z)
};

// Shares the L_k z products between D and the E_k. Re<z, L_k z> is taken
// through the inner product, then the real part.
inline SseCoeffs sse_coeffs(const SSEProblem& p, const Vec& z) {
    require(int(z.size()) == p.dim, "sse coefficients: dimension mismatch");
    SseCoeffs c;
    c.drift.assign(z.size(), cx(0.0));
    c.diffusions.reserve(p.lindblads.size());
    for (const Matrix& l : p.lindblads) {
        const Vec w = l * z;
        const double r = std::real(inner(z, w));
        Vec e(z.size());
        for (std::size_t j = 0; j < z.size(); ++j) {
            c.drift[j] += r * w[j] - 0.5 * r * r * z[j];
            e[j] = w[j] - r * z[j];
        }
        c.diffusions.push_back(std::move(e));
    }
    return c;
}

} // namespace detail

// D(z) = sum_k ( Re<z, L_k z> L_k z - 1/2 Re^2<z, L_k z> z ).
inline Vec drift_D(const SSEProblem& p, const Vec& z) { return detail::sse_coeffs(p, z).drift; }

// E_k(z) = L_k z - Re<z, L_k z> z; k is 1-based.
inline Vec diffusion_E(const SSEProblem& p, int k, const Vec& z) {
    if (k < 1 || k > int(p.lindblads.size()))
        throw DimensionError("diffusion_E: Lindblad index out of range");
    return detail::sse_coeffs(p, z).diffusions[std::size_t(k - 1)];
}

// p(z): 0 at 0, z/||z|| otherwise.
inline Vec project(const Vec& z) {
    const double n = norm(z);
    if (n == 0.0) return Vec(z.size(), cx(0.0));
    Vec out(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) out[j] = z[j] / n;
    return out;
}

// Step propagator, computed once per run: G is state-independent.
struct SSEStepContext {
    Scheme scheme = Scheme::scheme2;
    double dt = 0.0;
    Matrix propagator; // exp(G dt), (I - G dt)^{-1}, or I + G dt
};

inline SSEStepContext make_step_context(const SSEProblem& p, Scheme scheme, double dt) {
    if (!is_sse_scheme(scheme))
        throw ConfigError("SSE step context: scheme must be scheme2, scheme3 or explicit_euler");
    if (dt <= 0.0) throw ConfigError("SSE step context: time step must be positive");
    SSEStepContext ctx;
    ctx.scheme = scheme;
    ctx.dt = dt;
    switch (scheme) {
    case Scheme::scheme2:
        ctx.propagator = expm(p.G * cx(dt));
        break;
    case Scheme::scheme3:
        ctx.propagator = LuFactor(Matrix::identity(p.dim) - p.G * cx(dt)).inverse();
        break;
    default:
        ctx.propagator = Matrix::identity(p.dim) + p.G * cx(dt);
        break;
    }
    return ctx;
}

namespace detail {

struct SteppedState {
    Vec z;                // unit norm
    double preproj_norm;  // ||Phi|| before projection
};

// Reused buffers for the per-step hot path; sized on first use.
struct StepScratch {
    Vec y, w, out;
    void resize(std::size_t n) {
        y.resize(n);
        w.resize(n);
        out.resize(n);
    }
};

[[noreturn]] inline void report_bad_step(double n, int step_index) {
    if (!std::isfinite(n))
        throw NumericalError("SSE step " + std::to_string(step_index) + ": non-finite state");
    // A (near-)zero pre-projection vector is a probability-zero event for a
    // sane time step; continuing from it is meaningless, so fail loudly.
    throw DegenerateStepError("SSE step " + std::to_string(step_index) +
                              ": pre-projection vector collapsed to zero (||Phi|| = " +
                              std::to_string(n) + "); the time step is likely too large");
}

// One scheme step without any allocation: writes the projected state to
// s.out and returns the pre-projection norm.
inline double step_into(const SSEStepContext& ctx, const SSEProblem& p, const Vec& z,
                        const Vec& xi, int step_index, StepScratch& s) {
    require(xi.size() == p.lindblads.size(), "SSE step: noise dimension mismatch");
    const std::size_t n = z.size();
    s.resize(n);
    const double sqdt = std::sqrt(ctx.dt);
    const bool euler = ctx.scheme == Scheme::explicit_euler;

    // Ebar  = (I + G dt) z + D(z) dt + sqrt(dt) sum_k E_k(z) xi^k   (Euler)
    // Phi   = P (z + D(z) dt + sqrt(dt) sum_k E_k(z) xi^k)          (P = propagator)
    // Both accumulate dt (r w - r^2 z / 2) + sqrt(dt) xi^k (w - r z) per
    // channel, with w = L_k z and r = Re<z, w>.
    if (euler)
        ctx.propagator.apply(z, s.y);
    else
        std::copy(z.begin(), z.end(), s.y.begin());
    const auto* zd = reinterpret_cast<const double*>(z.data());
    auto* yd = reinterpret_cast<double*>(s.y.data());
    for (std::size_t k = 0; k < p.lindblads.size(); ++k) {
        p.lindblads[k].apply(z, s.w);
        const auto* wd = reinterpret_cast<const double*>(s.w.data());
        double r = 0.0; // Re<z, w> = sum (zr wr + zi wi)
        for (std::size_t j = 0; j < n; ++j)
            r += zd[2 * j] * wd[2 * j] + zd[2 * j + 1] * wd[2 * j + 1];
        const double noise = sqdt * xi[k].real();
        const double cw = ctx.dt * r + noise;
        const double cz = -0.5 * ctx.dt * r * r - noise * r;
        for (std::size_t j = 0; j < 2 * n; ++j) yd[j] += cw * wd[j] + cz * zd[j];
    }
    if (euler)
        s.out.swap(s.y);
    else
        ctx.propagator.apply(s.y, s.out);

    double nrm2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) nrm2 += std::norm(s.out[j]);
    const double nrm = std::sqrt(nrm2);
    if (!std::isfinite(nrm) || nrm < 1e-12) report_bad_step(nrm, step_index);
    const double inv = 1.0 / nrm;
    for (std::size_t j = 0; j < n; ++j) s.out[j] *= inv;
    return nrm;
}

inline SteppedState step_once(const SSEStepContext& ctx, const SSEProblem& p, const Vec& z,
                              const Vec& xi, int step_index) {
    StepScratch s;
    const double nrm = step_into(ctx, p, z, xi, step_index, s);
    return {std::move(s.out), nrm};
}

} // namespace detail

inline Vec scheme2_step(const SSEStepContext& ctx, const SSEProblem& p, const Vec& z,
                        const Vec& xi) {
    if (ctx.scheme != Scheme::scheme2)
        throw ConfigError("scheme2_step: context built for another scheme");
    return detail::step_once(ctx, p, z, xi, -1).z;
}

inline Vec scheme3_step(const SSEStepContext& ctx, const SSEProblem& p, const Vec& z,
                        const Vec& xi) {
    if (ctx.scheme != Scheme::scheme3)
        throw ConfigError("scheme3_step: context built for another scheme");
    return detail::step_once(ctx, p, z, xi, -1).z;
}

inline Vec explicit_euler_step(const SSEProblem& p, const Vec& z, double dt, const Vec& xi) {
    return detail::step_once(make_step_context(p, Scheme::explicit_euler, dt), p, z, xi, -1).z;
}

struct TrajectoryResult {
    std::vector<Vec> states;     // one per requested output index, in order
    double min_preproj_norm = 0; // over all M steps (Lemma-style lower bound log)
    double max_preproj_norm = 0;
};

// Iterates the one-step map M times from z0 and records the state at the
// requested step indices (which must be sorted; index 0 means the initial
// state). Noise increment for step m, channel k draws counter m*n + k.
inline TrajectoryResult run_trajectory(const SSEProblem& p, const SSEStepContext& ctx, int steps,
                                       NoiseLaw law, const CounterRng& rng,
                                       const std::vector<int>& output_indices) {
    if (steps < 1) throw ConfigError("run_trajectory: need at least one step");
    for (std::size_t j = 0; j < output_indices.size(); ++j) {
        if (output_indices[j] < 0 || output_indices[j] > steps)
            throw ConfigError("run_trajectory: output index outside [0, steps]");
        if (j > 0 && output_indices[j] <= output_indices[j - 1])
            throw ConfigError("run_trajectory: output indices must be strictly increasing");
    }

    const int n = int(p.lindblads.size());
    TrajectoryResult out;
    out.states.reserve(output_indices.size());
    out.min_preproj_norm = std::numeric_limits<double>::infinity();
    out.max_preproj_norm = 0.0;

    Vec z = p.z0;
    Vec xi(std::size_t(n), cx(0.0));
    std::size_t next_out = 0;
    if (next_out < output_indices.size() && output_indices[next_out] == 0) {
        out.states.push_back(z);
        ++next_out;
    }
    detail::StepScratch scratch;
    for (int m = 0; m < steps; ++m) {
        for (int k = 0; k < n; ++k) xi[std::size_t(k)] = law.sample(rng, std::uint64_t(m) * n + k);
        const double preproj = detail::step_into(ctx, p, z, xi, m, scratch);
        z.swap(scratch.out);
        out.min_preproj_norm = std::min(out.min_preproj_norm, preproj);
        out.max_preproj_norm = std::max(out.max_preproj_norm, preproj);
        if (next_out < output_indices.size() && output_indices[next_out] == m + 1) {
            out.states.push_back(z);
            ++next_out;
        }
    }
    return out;
}

} // namespace qsde
