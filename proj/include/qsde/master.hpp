#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "qsde/errors.hpp"
#include "qsde/linalg.hpp"
#include "qsde/sse.hpp"

namespace qsde {

// Right-hand side of the adjoint master equation
//   d tau / dt = G^* tau + tau G + sum_k L_k^* tau L_k.
inline Matrix lindblad_generator_apply(const SSEProblem& p, const Matrix& tau) {
    require(tau.rows() == p.dim && tau.cols() == p.dim,
            "lindblad_generator_apply: dimension mismatch");
    Matrix out = p.G.adjoint() * tau + tau * p.G;
    for (const Matrix& l : p.lindblads) out += l.adjoint() * tau * l;
    return out;
}

// The generator on column-major vectorized tau: vec(A X B) = (B^T kron A) vec(X).
inline Matrix lindblad_superoperator(const SSEProblem& p) {
    const Matrix eye = Matrix::identity(p.dim);
    Matrix s = kron(eye, p.G.adjoint()) + kron(p.G.transpose(), eye);
    for (const Matrix& l : p.lindblads) s += kron(l.transpose(), l.adjoint());
    return s;
}

inline Vec vectorize(const Matrix& m) {
    Vec v(std::size_t(m.rows()) * m.cols());
    for (int c = 0; c < m.cols(); ++c)
        for (int r = 0; r < m.rows(); ++r) v[std::size_t(c) * m.rows() + r] = m(r, c);
    return v;
}

inline Matrix unvectorize(const Vec& v, int dim) {
    require(int(v.size()) == dim * dim, "unvectorize: size mismatch");
    Matrix m(dim, dim);
    for (int c = 0; c < dim; ++c)
        for (int r = 0; r < dim; ++r) m(r, c) = v[std::size_t(c) * dim + r];
    return m;
}

enum class RefBackend { superop_expm, rk45 };

struct ReferenceSolution {
    std::vector<double> times;
    std::vector<Matrix> tau;
    std::vector<double> expectation; // <z0, tau_t z0>
};

namespace detail {

// Dormand-Prince 5(4) on the matrix ODE, integrating exactly to t_end.
class Rk45 {
public:
    Rk45(const SSEProblem& p, double rtol, double atol) : p_(p), rtol_(rtol), atol_(atol) {}

    void advance(Matrix& y, double t0, double t_end) const {
        double t = t0;
        double dt = std::min(1e-2, t_end - t0);
        int rejected_in_a_row = 0;
        while (t < t_end) {
            dt = std::min(dt, t_end - t);
            if (dt < 1e-14 * std::max(1.0, std::abs(t_end)))
                throw NumericalError("rk45: step size underflow");

            const Matrix k1 = lindblad_generator_apply(p_, y);
            const Matrix k2 = lindblad_generator_apply(p_, y + k1 * cx(dt * 1.0 / 5));
            const Matrix k3 =
                lindblad_generator_apply(p_, y + k1 * cx(dt * 3.0 / 40) + k2 * cx(dt * 9.0 / 40));
            const Matrix k4 = lindblad_generator_apply(p_, y + k1 * cx(dt * 44.0 / 45) -
                                                               k2 * cx(dt * 56.0 / 15) +
                                                               k3 * cx(dt * 32.0 / 9));
            const Matrix k5 = lindblad_generator_apply(
                p_, y + k1 * cx(dt * 19372.0 / 6561) - k2 * cx(dt * 25360.0 / 2187) +
                        k3 * cx(dt * 64448.0 / 6561) - k4 * cx(dt * 212.0 / 729));
            const Matrix k6 = lindblad_generator_apply(
                p_, y + k1 * cx(dt * 9017.0 / 3168) - k2 * cx(dt * 355.0 / 33) +
                        k3 * cx(dt * 46732.0 / 5247) + k4 * cx(dt * 49.0 / 176) -
                        k5 * cx(dt * 5103.0 / 18656));

            const Matrix y5 = y + k1 * cx(dt * 35.0 / 384) + k3 * cx(dt * 500.0 / 1113) +
                              k4 * cx(dt * 125.0 / 192) - k5 * cx(dt * 2187.0 / 6784) +
                              k6 * cx(dt * 11.0 / 84);
            const Matrix k7 = lindblad_generator_apply(p_, y5);
            // Difference of the 5th and embedded 4th order solutions.
            const Matrix err_m = k1 * cx(dt * 71.0 / 57600) - k3 * cx(dt * 71.0 / 16695) +
                                 k4 * cx(dt * 71.0 / 1920) - k5 * cx(dt * 17253.0 / 339200) +
                                 k6 * cx(dt * 22.0 / 525) - k7 * cx(dt * 1.0 / 40);

            double err = 0.0;
            for (int c = 0; c < y.cols(); ++c)
                for (int r = 0; r < y.rows(); ++r) {
                    const double scale =
                        atol_ + rtol_ * std::max(std::abs(y(r, c)), std::abs(y5(r, c)));
                    err = std::max(err, std::abs(err_m(r, c)) / scale);
                }

            if (err <= 1.0) {
                t += dt;
                y = y5;
                rejected_in_a_row = 0;
            } else if (++rejected_in_a_row > 60) {
                throw NumericalError("rk45: repeated step rejection");
            }
            const double factor = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
            dt *= std::clamp(factor, 0.2, 5.0);
        }
    }

private:
    const SSEProblem& p_;
    double rtol_;
    double atol_;
};

} // namespace detail

// Evolves tau from tau_0 = A and samples <z0, tau_t z0> at the given times.
// Default backend vectorizes tau and applies a dense matrix exponential of
// the superoperator per distinct time gap; rk45 is the independent cross-check.
inline ReferenceSolution solve_reference(const SSEProblem& p, double T,
                                         const std::vector<double>& times,
                                         RefBackend backend = RefBackend::superop_expm,
                                         double rtol = 1e-9, double atol = 1e-12) {
    for (std::size_t j = 0; j < times.size(); ++j) {
        if (times[j] < 0.0 || times[j] > T + 1e-12 * std::max(1.0, T))
            throw ConfigError("solve_reference: output time outside [0, T]");
        if (j > 0 && times[j] <= times[j - 1])
            throw ConfigError("solve_reference: output times must be strictly increasing");
    }

    ReferenceSolution out;
    out.times = times;
    out.tau.reserve(times.size());
    out.expectation.reserve(times.size());

    Matrix tau = p.observable;
    double t = 0.0;

    if (backend == RefBackend::superop_expm) {
        const Matrix s = lindblad_superoperator(p);
        std::map<double, Matrix> propagators; // keyed by time gap
        Vec v = vectorize(tau);
        for (double tj : times) {
            const double gap = tj - t;
            if (gap > 0.0) {
                auto it = propagators.find(gap);
                if (it == propagators.end())
                    it = propagators.emplace(gap, expm(s * cx(gap))).first;
                v = it->second * v;
                t = tj;
            }
            Matrix tau_j = unvectorize(v, p.dim);
            out.expectation.push_back(std::real(inner(p.z0, tau_j * p.z0)));
            out.tau.push_back(std::move(tau_j));
        }
    } else {
        detail::Rk45 integ(p, rtol, atol);
        for (double tj : times) {
            if (tj > t) {
                integ.advance(tau, t, tj);
                t = tj;
            }
            out.expectation.push_back(std::real(inner(p.z0, tau * p.z0)));
            out.tau.push_back(tau);
        }
    }
    return out;
}

} // namespace qsde
