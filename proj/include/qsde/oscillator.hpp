#pragma once

#include <cmath>
#include <vector>

#include "qsde/errors.hpp"
#include "qsde/linalg.hpp"
#include "qsde/sse.hpp"

namespace qsde {

// Fock space truncated to the span of the levels phi_0 .. phi_d (dimension d+1).
struct FockTruncation {
    int d = 1;
};

// a phi_m = sqrt(m) phi_{m-1}, a phi_0 = 0.
inline Matrix annihilation(const FockTruncation& tr) {
    if (tr.d < 1) throw ConfigError("annihilation: truncation level must be >= 1");
    Matrix a(tr.d + 1, tr.d + 1);
    for (int m = 1; m <= tr.d; ++m) a(m - 1, m) = std::sqrt(double(m));
    return a;
}

// Truncated creation operator: the adjoint of the truncated a, so the top
// level maps to zero.
inline Matrix creation(const FockTruncation& tr) { return annihilation(tr).adjoint(); }

// N = a^dagger a, diagonal 0..d on the truncated space.
inline Matrix number(const FockTruncation& tr) {
    const Matrix a = annihilation(tr);
    return a.adjoint() * a;
}

// Forced and damped harmonic oscillator: H = i(a^dagger - a) + N,
// L1 = 0.2 a, L2 = 0.01 a^2, L3 = 0.1 N, L4 = 0.1 a^dagger, observable N,
// initial state phi_6.
inline SSEProblem oscillator_problem(const FockTruncation& tr) {
    if (tr.d < 6) throw ConfigError("oscillator: need truncation level >= 6 (initial state phi_6)");
    const Matrix a = annihilation(tr);
    const Matrix ad = a.adjoint();
    const Matrix n = ad * a;

    Matrix h = (ad - a) * cx(0.0, 1.0) + n;
    h = (h + h.adjoint()) * cx(0.5); // scrub rounding; the invariant is exact Hermiticity

    std::vector<Matrix> ls;
    ls.push_back(a * cx(0.2));
    ls.push_back(a * a * cx(0.01));
    ls.push_back(n * cx(0.1));
    ls.push_back(ad * cx(0.1));

    Vec z0(std::size_t(tr.d) + 1, cx(0.0));
    z0[6] = 1.0;

    return make_sse_problem(std::move(h), std::move(ls), n, std::move(z0));
}

inline SSEProblem oscillator_problem(int d) { return oscillator_problem(FockTruncation{d}); }

} // namespace qsde
