#include <catch_amalgamated.hpp>

#include <cmath>

#include "qsde/sde.hpp"

using namespace qsde;

namespace {

SDEProblem cubic_problem() {
    SDEProblem p;
    p.dim = 1;
    p.noise_dim = 1;
    p.drift = [](double, const Vec& x) { return Vec{-x[0] * x[0] * x[0]}; };
    p.drift_jacobian = [](double, const Vec& x) {
        Matrix j(1, 1);
        j(0, 0) = -3.0 * x[0] * x[0];
        return j;
    };
    p.diffusion = [](double, const Vec&) {
        Matrix s(1, 1);
        s(0, 0) = 1.0;
        return s;
    };
    return p;
}

SDEProblem ou_problem() {
    SDEProblem p;
    p.dim = 1;
    p.noise_dim = 1;
    p.drift = [](double, const Vec& x) { return Vec{-x[0]}; };
    p.drift_jacobian = [](double, const Vec&) {
        Matrix j(1, 1);
        j(0, 0) = -1.0;
        return j;
    };
    p.diffusion = [](double, const Vec&) {
        Matrix s(1, 1);
        s(0, 0) = 1.0;
        return s;
    };
    p.autonomous_linear = true;
    return p;
}

std::function<Vec(const CounterRng&)> constant_x0(Vec x) {
    return [x](const CounterRng&) { return x; };
}

double ou_second_moment(double T, double x0) {
    return std::exp(-2.0 * T) * x0 * x0 + (1.0 - std::exp(-2.0 * T)) / 2.0;
}

} // namespace

TEST_CASE("euler_exp_step: pure noise gives sqrt(dt) scaling") {
    SDEProblem p;
    p.dim = p.noise_dim = 1;
    p.drift = [](double, const Vec&) { return Vec{0.0}; };
    p.diffusion = [](double, const Vec&) {
        Matrix s(1, 1);
        s(0, 0) = 1.0;
        return s;
    };
    const Vec out = euler_exp_step(p, 0.0, Vec{0.0}, 0.01, Vec{1.0});
    CHECK(std::abs(out[0] - 0.1) < 1e-15);
}

TEST_CASE("euler_exp_step: linear drift cancels the Euler correction") {
    SDEProblem p;
    p.dim = 2;
    p.noise_dim = 1;
    Matrix b(2, 2);
    b(0, 0) = -1.0;
    b(0, 1) = 0.5;
    b(1, 0) = -0.2;
    b(1, 1) = -2.0;
    p.drift = [b](double, const Vec& x) { return b * x; };
    p.drift_jacobian = [b](double, const Vec&) { return b; };
    Matrix sig(2, 1);
    sig(0, 0) = 0.3;
    sig(1, 0) = 1.1;
    p.diffusion = [sig](double, const Vec&) { return sig; };

    const double dt = 0.07;
    const Vec x{1.0, -0.5};
    const Vec xi{1.0};
    const Vec got = euler_exp_step(p, 0.0, x, dt, xi);

    Vec inner_term = x;
    const Vec noise = sig * xi;
    for (int k = 0; k < 2; ++k) inner_term[std::size_t(k)] += std::sqrt(dt) * noise[std::size_t(k)];
    const Vec expected = expm(b * cx(dt)) * inner_term;
    for (int k = 0; k < 2; ++k)
        CHECK(std::abs(got[std::size_t(k)] - expected[std::size_t(k)]) < 1e-14);
}

TEST_CASE("euler_exp_step: hand-evaluated cubic-drift formula") {
    // b(x) = -x^3 at x = 1, dt = 0.1, xi = 0: Jb = -3,
    // step = exp(-0.3) * (1 + 0.1 * (-1 + 3)) = exp(-0.3) * 1.2
    const Vec out = euler_exp_step(cubic_problem(), 0.0, Vec{1.0}, 0.1, Vec{0.0});
    CHECK(std::abs(out[0] - std::exp(-0.3) * 1.2) < 1e-14);
}

TEST_CASE("implicit step with zero drift reduces to explicit Euler") {
    SDEProblem p;
    p.dim = p.noise_dim = 1;
    p.drift = [](double, const Vec&) { return Vec{0.0}; };
    p.diffusion = [](double, const Vec&) {
        Matrix s(1, 1);
        s(0, 0) = 2.0;
        return s;
    };
    const double dt = 0.04;
    const Vec a = implicit_exp_step(p, 0.0, Vec{0.5}, dt, Vec{-1.0});
    const Vec b = euler_exp_step(p, 0.0, Vec{0.5}, dt, Vec{-1.0});
    const double euler = 0.5 + std::sqrt(dt) * 2.0 * -1.0;
    CHECK(a[0] == b[0]); // Jb = 0: both collapse to the same explicit step
    CHECK(std::abs(a[0].real() - euler) < 1e-15);
}

TEST_CASE("implicit step: scalar resolvent") {
    const double lambda = 1.7, dt = 0.05, sigma = 0.4, x0 = 0.9, xi = 1.0;
    SDEProblem p;
    p.dim = p.noise_dim = 1;
    p.drift = [lambda](double, const Vec& x) { return Vec{-lambda * x[0]}; };
    p.drift_jacobian = [lambda](double, const Vec&) {
        Matrix j(1, 1);
        j(0, 0) = -lambda;
        return j;
    };
    p.diffusion = [sigma](double, const Vec&) {
        Matrix s(1, 1);
        s(0, 0) = sigma;
        return s;
    };
    const Vec out = implicit_exp_step(p, 0.0, Vec{x0}, dt, Vec{xi});
    const double expected = (x0 + std::sqrt(dt) * sigma * xi) / (1.0 + lambda * dt);
    CHECK(std::abs(out[0] - expected) < 1e-14);
}

TEST_CASE("explicit and implicit steps agree to O(dt^2)") {
    const SDEProblem p = cubic_problem();
    double prev_ratio = 0.0;
    for (double dt : {1e-2, 1e-3, 1e-4}) {
        const Vec a = euler_exp_step(p, 0.0, Vec{1.0}, dt, Vec{0.0});
        const Vec b = implicit_exp_step(p, 0.0, Vec{1.0}, dt, Vec{0.0});
        const double ratio = std::abs(a[0] - b[0]) / (dt * dt);
        if (prev_ratio != 0.0) CHECK(ratio == Catch::Approx(prev_ratio).epsilon(0.05));
        prev_ratio = ratio;
    }
}

TEST_CASE("finite-difference Jacobian fallback is consistent") {
    SDEProblem p = cubic_problem();
    CHECK(jacobian_consistency(p, 0.0, Vec{1.3}) < 1e-5);
    SDEProblem nofd = p;
    nofd.drift_jacobian = nullptr;
    const Matrix j = jacobian_of(nofd, 0.0, Vec{1.3});
    CHECK(std::abs(j(0, 0) - cx(-3.0 * 1.3 * 1.3)) < 1e-5);
}

TEST_CASE("run_weak: deterministic constant problem") {
    SDEProblem p;
    p.dim = p.noise_dim = 1;
    p.drift = [](double, const Vec&) { return Vec{0.0}; };
    p.drift_jacobian = [](double, const Vec&) { return Matrix(1, 1); };
    p.diffusion = [](double, const Vec&) { return Matrix(1, 1); }; // sigma = 0
    const WeakEstimate est =
        run_weak(p, constant_x0(Vec{2.5}), 1.0, 4, {NoiseKind::rademacher}, Scheme::scheme1,
                 [](const Vec& x) { return x[0].real(); }, 40, 1);
    CHECK(est.mean == 2.5);
    CHECK(est.ci_halfwidth == 0.0);
}

TEST_CASE("run_weak: OU mean is exact up to Monte Carlo error") {
    const double T = 1.0;
    const WeakEstimate est = run_weak(
        ou_problem(), constant_x0(Vec{1.0}), T, 16, {NoiseKind::rademacher}, Scheme::scheme1,
        [](const Vec& x) { return x[0].real(); }, 40000, 7);
    CHECK(std::abs(est.mean - std::exp(-T)) < 3.0 * est.ci_halfwidth);
}

TEST_CASE("run_weak: OU second moment bias is O(dt)") {
    const double T = 1.0;
    const double truth = ou_second_moment(T, 1.0);
    const auto payoff = [](const Vec& x) { return x[0].real() * x[0].real(); };
    double prev_bias = 0.0;
    for (int M : {8, 32}) {
        const WeakEstimate est = run_weak(ou_problem(), constant_x0(Vec{1.0}), T, M,
                                          {NoiseKind::rademacher}, Scheme::scheme1, payoff,
                                          200000, 11);
        const double bias = std::abs(est.mean - truth);
        CHECK(bias < 0.08 * (T / M) / (T / 8.0) + 3.0 * est.ci_halfwidth);
        if (prev_bias != 0.0) CHECK(bias < prev_bias);
        prev_bias = bias;
    }
}

TEST_CASE("run_weak: generic and cached linear paths agree bitwise") {
    SDEProblem generic = ou_problem();
    generic.autonomous_linear = false;
    SDEProblem cached = ou_problem();
    const auto payoff = [](const Vec& x) { return x[0].real(); };
    const WeakEstimate a = run_weak(generic, constant_x0(Vec{1.0}), 1.0, 8,
                                    {NoiseKind::rademacher}, Scheme::scheme1, payoff, 200, 3);
    const WeakEstimate b = run_weak(cached, constant_x0(Vec{1.0}), 1.0, 8,
                                    {NoiseKind::rademacher}, Scheme::scheme1, payoff, 200, 3);
    CHECK(a.mean == b.mean);
    CHECK(a.ci_halfwidth == b.ci_halfwidth);
}

TEST_CASE("richardson extrapolation") {
    CHECK(richardson(3.0, 3.0) == 3.0);
    const double a = 1.7, b = -0.9, dt = 0.25;
    CHECK(richardson(a + b * dt, a + b * dt / 2.0) == Catch::Approx(a).margin(1e-15));
}

TEST_CASE("run_weak validates its configuration") {
    const SDEProblem p = ou_problem();
    const auto payoff = [](const Vec& x) { return x[0].real(); };
    CHECK_THROWS_AS(run_weak(p, constant_x0(Vec{1.0}), 1.0, 0, {}, Scheme::scheme1, payoff, 40, 1),
                    ConfigError);
    CHECK_THROWS_AS(run_weak(p, constant_x0(Vec{1.0}), 1.0, 4, {}, Scheme::scheme2, payoff, 40, 1),
                    ConfigError);
    CHECK_THROWS_AS(run_weak(p, constant_x0(Vec{1.0}), 1.0, 4, {}, Scheme::scheme1, payoff, 41, 1),
                    ConfigError);
}
