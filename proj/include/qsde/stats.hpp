#pragma once

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <span>
#include <vector>

#include "qsde/errors.hpp"

namespace qsde {

// Compensated summation in the order the samples are stored, so parallel
// producers reduce to bitwise-identical results.
inline double kahan_sum(std::span<const double> xs) {
    double s = 0.0, c = 0.0;
    for (double x : xs) {
        const double y = x - c;
        const double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    return s;
}

inline double kahan_mean(std::span<const double> xs) {
    if (xs.empty()) throw DimensionError("mean of empty sample");
    return kahan_sum(xs) / double(xs.size());
}

// Two-sided t-interval half-width around the grand mean of precomputed
// batch means.
inline double batch_means_ci_from_means(std::span<const double> means, double level = 0.90) {
    const int batches = int(means.size());
    if (batches < 2) throw ConfigError("batch_means_ci: need at least 2 batches");
    const double grand = kahan_mean(means);

    double ss = 0.0;
    for (double m : means) ss += (m - grand) * (m - grand);
    const double sd = std::sqrt(ss / double(batches - 1));

    boost::math::students_t dist(batches - 1);
    const double tq = boost::math::quantile(dist, 0.5 + level / 2.0);
    return tq * sd / std::sqrt(double(batches));
}

// Batch-means confidence interval half-width: group the samples (in order)
// into `batches` equal batches and apply a two-sided t-interval to the batch
// means.
inline double batch_means_ci(std::span<const double> samples, int batches, double level = 0.90) {
    if (batches < 2) throw ConfigError("batch_means_ci: need at least 2 batches");
    if (samples.size() % std::size_t(batches) != 0)
        throw ConfigError("batch_means_ci: sample count not divisible by batch count");
    const std::size_t per = samples.size() / std::size_t(batches);
    if (per == 0) throw ConfigError("batch_means_ci: empty batches");

    std::vector<double> means(std::size_t(batches), 0.0);
    for (int b = 0; b < batches; ++b)
        means[std::size_t(b)] = kahan_mean(samples.subspan(std::size_t(b) * per, per));
    return batch_means_ci_from_means(means, level);
}

// Least-squares slope of log(y) against log(x).
inline double fit_loglog_slope(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw DimensionError("slope fit: size mismatch");
    if (xs.size() < 2) throw ConfigError("slope fit: need at least 2 points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i] <= 0.0 || ys[i] <= 0.0)
            throw NumericalError("slope fit: nonpositive value in log-log data");
        const double lx = std::log(xs[i]);
        const double ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace qsde
