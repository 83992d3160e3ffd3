#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>

#include "qsde/rng.hpp"

using namespace qsde;

namespace {

struct Moments {
    double mean, var;
};

Moments sample_moments(const NoiseLaw& law, std::int64_t n) {
    const CounterRng rng(77, 0);
    double s = 0.0, s2 = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double x = law.sample(rng, std::uint64_t(i));
        s += x;
        s2 += x * x;
    }
    const double mean = s / double(n);
    return {mean, s2 / double(n) - mean * mean};
}

} // namespace

TEST_CASE("noise laws have mean 0 and variance 1") {
    const std::int64_t n = 200000;
    const double mean_tol = 4.0 / std::sqrt(double(n));
    const double var_tol = 8.0 / std::sqrt(double(n));
    for (NoiseKind kind : {NoiseKind::rademacher, NoiseKind::gaussian}) {
        const Moments m = sample_moments({kind}, n);
        CHECK(std::abs(m.mean) <= mean_tol);
        CHECK(std::abs(m.var - 1.0) <= var_tol);
    }
}

TEST_CASE("rademacher draws are exactly plus or minus one") {
    const CounterRng rng(5, 3);
    bool saw_plus = false, saw_minus = false;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const double x = rng.rademacher(i);
        CHECK((x == 1.0 || x == -1.0));
        saw_plus |= x == 1.0;
        saw_minus |= x == -1.0;
    }
    CHECK(saw_plus);
    CHECK(saw_minus);
}

TEST_CASE("symmetric-law sign balance for gaussian draws") {
    const CounterRng rng(11, 1);
    int pos = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i)
        if (rng.gaussian(std::uint64_t(i)) > 0.0) ++pos;
    CHECK(std::abs(pos - n / 2) < 4 * std::sqrt(double(n)));
}

TEST_CASE("counter streams are reproducible and distinct") {
    const CounterRng a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    for (std::uint64_t i = 0; i < 64; ++i) {
        CHECK(a.bits(i) == b.bits(i));
        CHECK(a.bits(i) != c.bits(i));
        CHECK(a.bits(i) != d.bits(i));
    }
}

TEST_CASE("uniform draws live strictly inside (0,1)") {
    const CounterRng rng(1, 0);
    for (std::uint64_t i = 0; i < 10000; ++i) {
        const double u = rng.uniform(i);
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
}
