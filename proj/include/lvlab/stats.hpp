#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "lvlab/errors.hpp"

namespace lvlab {

struct TwoSampleReport {
    double ks_statistic = 0.0;   ///< exact two-sample Kolmogorov–Smirnov statistic
    double wasserstein1 = 0.0;   ///< W1 distance of the empirical measures
    std::size_t n_a = 0, n_b = 0;
    double alpha = 0.05;
    bool reject = false;         ///< ks above the asymptotic critical value at alpha
};

inline double ks_critical_value(std::size_t n_a, std::size_t n_b, double alpha) {
    const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
    const double na = static_cast<double>(n_a), nb = static_cast<double>(n_b);
    return c * std::sqrt((na + nb) / (na * nb));
}

/// Exact KS statistic plus W1 = int |F_A - F_B| over the merged support.
inline TwoSampleReport two_sample_stats(std::vector<double> a, std::vector<double> b,
                                        double alpha = 0.05) {
    if (a.empty() || b.empty()) fail(errc::empty_sample, "two_sample_stats needs non-empty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());

    TwoSampleReport rep;
    rep.n_a = a.size();
    rep.n_b = b.size();
    rep.alpha = alpha;

    const double ia = 1.0 / static_cast<double>(a.size());
    const double ib = 1.0 / static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double fa = 0.0, fb = 0.0, ks = 0.0, w1 = 0.0;
    double prev = std::min(a.front(), b.front());
    while (i < a.size() || j < b.size()) {
        const double x = (i < a.size() && (j >= b.size() || a[i] <= b[j])) ? a[i] : b[j];
        w1 += std::abs(fa - fb) * (x - prev);
        while (i < a.size() && a[i] == x) { fa += ia; ++i; }
        while (j < b.size() && b[j] == x) { fb += ib; ++j; }
        ks = std::max(ks, std::abs(fa - fb));
        prev = x;
    }
    rep.ks_statistic = std::min(ks, 1.0);
    rep.wasserstein1 = w1;
    rep.reject = rep.ks_statistic > ks_critical_value(rep.n_a, rep.n_b, alpha);
    return rep;
}

// ── small ensemble helpers ───────────────────────────────────────────────────

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double sample_sd(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline double standard_error(const std::vector<double>& v) {
    return sample_sd(v) / std::sqrt(static_cast<double>(v.size()));
}

/// least-squares slope of y against x
inline double fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double mx = mean_of(x), my = mean_of(y);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += (x[i] - mx) * (y[i] - my);
        den += (x[i] - mx) * (x[i] - mx);
    }
    return num / den;
}

}  // namespace lvlab
