#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "lvlab/errors.hpp"

namespace lvlab {

namespace detail {

inline double simpson(double a, double fa, double b, double fb, double fm) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <class F>
double adaptive_simpson_rec(F&& f, double a, double fa, double b, double fb, double m, double fm,
                            double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(a, fa, m, fm, flm);
    const double right = simpson(m, fm, b, fb, frm);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature to an absolute tolerance.
template <class F>
double integrate_adaptive(F&& f, double a, double b, double abs_tol, int max_depth = 48) {
    if (a == b) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fb = f(b), fm = f(m);
    const double whole = detail::simpson(a, fa, b, fb, fm);
    return detail::adaptive_simpson_rec(f, a, fa, b, fb, m, fm, whole, abs_tol, max_depth);
}

/// Cumulative integral of f on a uniform grid over [a,b]: returns values of
/// int_a^{x_i} f at the n+1 grid nodes (composite Simpson on node pairs).
/// The grid is doubled until two successive refinements of the total agree to
/// abs_tol; used where many antiderivative values are needed at once.
template <class F>
std::vector<double> cumulative_integral(F&& f, double a, double b, double abs_tol,
                                        std::size_t n_init = 256, std::size_t n_max = (1u << 21)) {
    std::size_t n = n_init;
    std::vector<double> cum;
    double prev_total = std::nan("");
    for (;; n *= 2) {
        const double dx = (b - a) / static_cast<double>(n);
        cum.assign(n + 1, 0.0);
        double fl = f(a);
        for (std::size_t i = 0; i < n; ++i) {
            const double xl = a + dx * static_cast<double>(i);
            const double fm = f(xl + 0.5 * dx);
            const double fr = f(xl + dx);
            cum[i + 1] = cum[i] + dx / 6.0 * (fl + 4.0 * fm + fr);
            fl = fr;
        }
        if (!std::isnan(prev_total) && std::abs(cum[n] - prev_total) <= abs_tol) break;
        prev_total = cum[n];
        if (2 * n > n_max) break;
    }
    return cum;
}

/// Linear interpolation into a cumulative_integral result.
inline double eval_cumulative(const std::vector<double>& cum, double a, double b, double x) {
    const std::size_t n = cum.size() - 1;
    const double dx = (b - a) / static_cast<double>(n);
    if (x <= a) return cum.front();
    if (x >= b) return cum.back();
    const double u = (x - a) / dx;
    const std::size_t i = static_cast<std::size_t>(u);
    const double frac = u - static_cast<double>(i);
    return cum[i] + frac * (cum[i + 1] - cum[i]);
}

}  // namespace lvlab
