#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qsde/errors.hpp"
#include "qsde/master.hpp"
#include "qsde/parallel.hpp"
#include "qsde/rng.hpp"
#include "qsde/scheme.hpp"
#include "qsde/sse.hpp"
#include "qsde/stats.hpp"

namespace qsde {

struct SchemeConfig {
    Scheme scheme = Scheme::scheme2;
    double T = 100.0;
    int steps = 2000;             // M
    std::int64_t trajectories = 500; // N
    NoiseLaw noise = {NoiseKind::rademacher};
    std::uint64_t seed = 0;
    int output_points = 100; // J_max: states recorded at t_j = j T / output_points
    int batches = 20;
    int workers = 1;
};

struct EnsembleStats {
    std::vector<double> times;
    std::vector<double> mean;         // estimate of <z, A z> per output time
    std::vector<double> ci_halfwidth; // 90% batch-means interval per output time
    std::int64_t trajectories = 0;
    double min_preproj_norm = 0.0; // over all steps of all trajectories
    double max_preproj_norm = 0.0;
};

inline void validate(const SchemeConfig& cfg) {
    if (!is_sse_scheme(cfg.scheme))
        throw ConfigError("estimate_observable: scheme must be scheme2, scheme3 or explicit_euler");
    if (cfg.T <= 0.0) throw ConfigError("config: horizon T must be positive");
    if (cfg.steps < 1) throw ConfigError("config: steps must be >= 1");
    if (cfg.output_points < 1) throw ConfigError("config: output_points must be >= 1");
    if (cfg.steps % cfg.output_points != 0)
        throw ConfigError("config: steps must be divisible by output_points");
    if (cfg.batches < 2) throw ConfigError("config: need at least 2 batches");
    if (cfg.trajectories < 2 * cfg.batches)
        throw ConfigError("config: trajectories must be at least twice the batch count");
    if (cfg.trajectories % cfg.batches != 0)
        throw ConfigError("config: trajectories must be divisible by the batch count");
}

namespace detail {

// Per-batch accumulator: Kahan-compensated sums of <z, A z> per output time,
// added in trajectory order so the reduction is deterministic for any worker
// count.
struct BatchSums {
    std::vector<double> sum, comp;
    double min_preproj = std::numeric_limits<double>::infinity();
    double max_preproj = 0.0;

    explicit BatchSums(std::size_t cols = 0) : sum(cols, 0.0), comp(cols, 0.0) {}

    void add(std::size_t j, double x) {
        const double y = x - comp[j];
        const double t = sum[j] + y;
        comp[j] = (t - sum[j]) - y;
        sum[j] = t;
    }
};

inline cx inner_raw(const cx* x, const cx* y, int n) {
    cx s(0.0);
    for (int j = 0; j < n; ++j) s += std::conj(x[j]) * y[j];
    return s;
}

// y[:, 0..cols) = m x[:, 0..cols); both blocks are column-major with leading
// dimension m.cols().
inline void apply_block(const Matrix& m, const cx* x, cx* y, int cols) {
    const cx one(1.0), zero(0.0);
    cblas_zgemm(CblasColMajor, CblasNoTrans, CblasNoTrans, m.rows(), cols, m.cols(), &one,
                m.data(), m.rows(), x, m.cols(), &zero, y, m.rows());
}

// Runs trajectories [first, first + count) in lockstep blocks: every linear
// map of the step (propagator, each Lindblad, the observable) is one
// matrix-matrix product across the block instead of one matrix-vector
// product per trajectory, which is where nearly all the time goes for small
// dimensions. Each trajectory still sees exactly the per-step arithmetic of
// detail::step_into with its own noise stream.
inline BatchSums run_trajectory_block(const SSEProblem& p, const SSEStepContext& ctx,
                                      const SchemeConfig& cfg, const std::vector<int>& out_idx,
                                      std::int64_t first, std::int64_t count) {
    const int d = p.dim;
    const int n = int(p.lindblads.size());
    const double dt = ctx.dt;
    const double sqdt = std::sqrt(dt);
    const bool euler = ctx.scheme == Scheme::explicit_euler;
    constexpr std::int64_t block_max = 64;

    BatchSums acc(out_idx.size());
    std::vector<cx> Z(std::size_t(d) * block_max), Y(Z.size()), W(Z.size()), V(Z.size());
    std::vector<CounterRng> rng;
    rng.reserve(std::size_t(block_max));

    for (std::int64_t start = 0; start < count; start += block_max) {
        const int B = int(std::min(block_max, count - start));
        rng.clear();
        for (int c = 0; c < B; ++c) {
            rng.emplace_back(cfg.seed, trajectory_stream(std::uint64_t(first + start + c), 0));
            std::copy(p.z0.begin(), p.z0.end(), Z.begin() + std::size_t(c) * d);
        }

        const auto record = [&](std::size_t j) {
            apply_block(p.observable, Z.data(), V.data(), B);
            for (int c = 0; c < B; ++c) {
                const cx v = inner_raw(Z.data() + std::size_t(c) * d,
                                       V.data() + std::size_t(c) * d, d);
                if (std::abs(v.imag()) > 1e-10)
                    throw NumericalError("trajectory " + std::to_string(first + start + c) +
                                         ": observable sandwich has imaginary part " +
                                         std::to_string(v.imag()));
                acc.add(j, v.real());
            }
        };

        std::size_t next_out = 0;
        if (next_out < out_idx.size() && out_idx[next_out] == 0) record(next_out++);

        for (int m = 0; m < cfg.steps; ++m) {
            if (euler)
                apply_block(ctx.propagator, Z.data(), Y.data(), B);
            else
                std::copy(Z.begin(), Z.begin() + std::size_t(d) * B, Y.begin());
            for (int k = 0; k < n; ++k) {
                apply_block(p.lindblads[std::size_t(k)], Z.data(), W.data(), B);
                for (int c = 0; c < B; ++c) {
                    const auto* zd = reinterpret_cast<const double*>(Z.data() + std::size_t(c) * d);
                    const auto* wd = reinterpret_cast<const double*>(W.data() + std::size_t(c) * d);
                    auto* yd = reinterpret_cast<double*>(Y.data() + std::size_t(c) * d);
                    double r = 0.0; // Re<z, w> = sum (zr wr + zi wi)
                    for (int j = 0; j < d; ++j)
                        r += zd[2 * j] * wd[2 * j] + zd[2 * j + 1] * wd[2 * j + 1];
                    const double noise =
                        sqdt * cfg.noise.sample(rng[std::size_t(c)], std::uint64_t(m) * n + k);
                    const double cw = dt * r + noise;
                    const double cz = -0.5 * dt * r * r - noise * r;
                    for (int j = 0; j < 2 * d; ++j) yd[j] += cw * wd[j] + cz * zd[j];
                }
            }
            std::vector<cx>& phi = euler ? Y : W;
            if (!euler) apply_block(ctx.propagator, Y.data(), W.data(), B);
            for (int c = 0; c < B; ++c) {
                auto* col = phi.data() + std::size_t(c) * d;
                double nrm2 = 0.0;
                for (int j = 0; j < d; ++j) nrm2 += std::norm(col[j]);
                const double nrm = std::sqrt(nrm2);
                if (!std::isfinite(nrm) || nrm < 1e-12) {
                    try {
                        report_bad_step(nrm, m);
                    } catch (const Error& e) {
                        throw NumericalError("trajectory " + std::to_string(first + start + c) +
                                             ": " + e.what());
                    }
                }
                const double inv = 1.0 / nrm;
                for (int j = 0; j < d; ++j) col[j] *= inv;
                acc.min_preproj = std::min(acc.min_preproj, nrm);
                acc.max_preproj = std::max(acc.max_preproj, nrm);
            }
            Z.swap(phi);
            if (next_out < out_idx.size() && out_idx[next_out] == m + 1) record(next_out++);
        }
    }
    return acc;
}

} // namespace detail

// Monte Carlo mean of <z_t, A z_t> over independent trajectories, per output
// time, with batch-means confidence intervals. Any trajectory failure aborts
// the whole estimate: silently dropping paths would bias the mean. Work is
// partitioned by batch, so batch sums (and hence every reported number) are
// independent of the worker count.
inline EnsembleStats estimate_observable(const SSEProblem& p, const SchemeConfig& cfg) {
    validate(cfg);
    if ((p.observable - p.observable.adjoint()).max_abs() > 1e-12)
        throw ConfigError("estimate_observable: observable is not Hermitian");

    const double dt = cfg.T / double(cfg.steps);
    const SSEStepContext ctx = make_step_context(p, cfg.scheme, dt);

    const int J = cfg.output_points;
    std::vector<int> out_idx(std::size_t(J) + 1);
    for (int j = 0; j <= J; ++j) out_idx[std::size_t(j)] = j * (cfg.steps / J);

    const std::size_t cols = std::size_t(J) + 1;
    const std::int64_t per_batch = cfg.trajectories / cfg.batches;
    std::vector<detail::BatchSums> acc(std::size_t(cfg.batches));

    parallel_for(cfg.batches, cfg.workers, [&](std::int64_t b) {
        acc[std::size_t(b)] =
            detail::run_trajectory_block(p, ctx, cfg, out_idx, b * per_batch, per_batch);
    });

    EnsembleStats stats;
    stats.trajectories = cfg.trajectories;
    stats.times.resize(cols);
    stats.mean.resize(cols);
    stats.ci_halfwidth.resize(cols);
    std::vector<double> bm(std::size_t(cfg.batches), 0.0);
    for (std::size_t j = 0; j < cols; ++j) {
        stats.times[j] = cfg.T * double(out_idx[j]) / double(cfg.steps);
        for (int b = 0; b < cfg.batches; ++b)
            bm[std::size_t(b)] = acc[std::size_t(b)].sum[j] / double(per_batch);
        stats.mean[j] = kahan_mean(bm);
        stats.ci_halfwidth[j] = batch_means_ci_from_means(bm);
    }
    stats.min_preproj_norm = acc.front().min_preproj;
    stats.max_preproj_norm = acc.front().max_preproj;
    for (const detail::BatchSums& a : acc) {
        stats.min_preproj_norm = std::min(stats.min_preproj_norm, a.min_preproj);
        stats.max_preproj_norm = std::max(stats.max_preproj_norm, a.max_preproj);
    }
    return stats;
}

// eps_J = max over j = J..J_max of |estimate_j - reference_j|.
inline double epsilon_J(std::span<const double> times, std::span<const double> estimate,
                        std::span<const double> ref_times, std::span<const double> reference,
                        int J) {
    if (times.size() != estimate.size() || times.size() != ref_times.size() ||
        times.size() != reference.size())
        throw DimensionError("epsilon_J: output grids differ in length");
    for (std::size_t j = 0; j < times.size(); ++j)
        if (std::abs(times[j] - ref_times[j]) > 1e-9 * std::max(1.0, std::abs(ref_times[j])))
            throw ConfigError("epsilon_J: output grids do not match");
    if (J < 0 || std::size_t(J) >= times.size())
        throw ConfigError("epsilon_J: start index outside the grid");
    double m = 0.0;
    for (std::size_t j = std::size_t(J); j < times.size(); ++j)
        m = std::max(m, std::abs(estimate[j] - reference[j]));
    return m;
}

inline double epsilon_J(std::span<const double> times, std::span<const double> estimate,
                        const ReferenceSolution& ref, int J) {
    return epsilon_J(times, estimate, ref.times, ref.expectation, J);
}

inline double epsilon_J(const EnsembleStats& stats, const ReferenceSolution& ref, int J) {
    return epsilon_J(stats.times, stats.mean, ref, J);
}

} // namespace qsde
