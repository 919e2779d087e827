#pragma once

#include <cmath>

#include "lvlab/errors.hpp"

// Legendre elliptic integrals and the Jacobi amplitude, all in the
// *parameter* convention m (so K(m) = F(pi/2 | m); no modulus-k API exists).
// Incomplete integrals go through Carlson symmetric forms, complete ones
// through the AGM; both ways deliver ~1e-15 relative accuracy for m in [0,1).

namespace lvlab::elliptic {

namespace detail {

inline void require_param(double m) {
    if (!(m >= 0.0 && m < 1.0))
        fail(errc::param_out_of_range, "elliptic parameter m must lie in [0,1)");
}

/// Carlson R_F(x,y,z) by duplication
inline double carlson_rf(double x, double y, double z) {
    constexpr double ERRTOL = 2.5e-4;  // ~1e-16 accuracy after the Taylor tail
    double xt = x, yt = y, zt = z;
    double mu, dx, dy, dz;
    do {
        const double sx = std::sqrt(xt), sy = std::sqrt(yt), sz = std::sqrt(zt);
        const double lam = sx * (sy + sz) + sy * sz;
        xt = 0.25 * (xt + lam);
        yt = 0.25 * (yt + lam);
        zt = 0.25 * (zt + lam);
        mu = (xt + yt + zt) / 3.0;
        dx = (mu - xt) / mu;
        dy = (mu - yt) / mu;
        dz = (mu - zt) / mu;
    } while (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) > ERRTOL);
    const double e2 = dx * dy - dz * dz;
    const double e3 = dx * dy * dz;
    return (1.0 + (e2 / 24.0 - 0.1 - 3.0 * e3 / 44.0) * e2 + e3 / 14.0) / std::sqrt(mu);
}

/// Carlson R_D(x,y,z) by duplication
inline double carlson_rd(double x, double y, double z) {
    constexpr double ERRTOL = 1.5e-3;
    double xt = x, yt = y, zt = z;
    double sum = 0.0, fac = 1.0;
    double mu, dx, dy, dz;
    do {
        const double sx = std::sqrt(xt), sy = std::sqrt(yt), sz = std::sqrt(zt);
        const double lam = sx * (sy + sz) + sy * sz;
        sum += fac / (sz * (zt + lam));
        fac *= 0.25;
        xt = 0.25 * (xt + lam);
        yt = 0.25 * (yt + lam);
        zt = 0.25 * (zt + lam);
        mu = 0.2 * (xt + yt + 3.0 * zt);
        dx = (mu - xt) / mu;
        dy = (mu - yt) / mu;
        dz = (mu - zt) / mu;
    } while (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) > ERRTOL);
    const double ea = dx * dy;
    const double eb = dz * dz;
    const double ec = ea - eb;
    const double ed = ea - 6.0 * eb;
    const double ee = ed + ec + ec;
    return 3.0 * sum +
           fac *
               (1.0 + ed * (-3.0 / 14.0 + 9.0 / 88.0 * ed - 4.5 / 26.0 * dz * ee) +
                dz * (ee / 6.0 + dz * (-9.0 / 22.0 * ec + 3.0 / 26.0 * dz * ea))) /
               (mu * std::sqrt(mu));
}

/// F and E on the principal strip phi in [-pi/2, pi/2]
inline double f_principal(double phi, double m) {
    const double s = std::sin(phi), c = std::cos(phi);
    if (s == 0.0) return 0.0;
    return s * carlson_rf(c * c, 1.0 - m * s * s, 1.0);
}

inline double e_principal(double phi, double m) {
    const double s = std::sin(phi), c = std::cos(phi);
    if (s == 0.0) return 0.0;
    const double s2 = s * s;
    return s * (carlson_rf(c * c, 1.0 - m * s2, 1.0) -
                (m / 3.0) * s2 * carlson_rd(c * c, 1.0 - m * s2, 1.0));
}

}  // namespace detail

/// complete integral of the first kind, K(m) = F(pi/2 | m), via the AGM
inline double complete_k(double m) {
    detail::require_param(m);
    double a = 1.0, b = std::sqrt(1.0 - m);
    for (int it = 0; it < 40 && std::abs(a - b) > 4e-16 * a; ++it) {
        const double an = 0.5 * (a + b);
        b = std::sqrt(a * b);
        a = an;
    }
    return 1.5707963267948966192313216916398 / (0.5 * (a + b));
}

/// complete integral of the second kind, E(m), via the AGM companion sums
inline double complete_e(double m) {
    detail::require_param(m);
    double a = 1.0, b = std::sqrt(1.0 - m), c = std::sqrt(m);
    double sum = 0.5 * c * c;  // 2^{n-1} c_n^2 accumulated from n = 0
    double pow2 = 1.0;
    for (int it = 0; it < 40 && std::abs(c) > 1e-17; ++it) {
        c = 0.5 * (a - b);
        const double an = 0.5 * (a + b);
        b = std::sqrt(a * b);
        a = an;
        pow2 *= 2.0;
        sum += 0.5 * pow2 * c * c;
    }
    return 1.5707963267948966192313216916398 / (0.5 * (a + b)) * (1.0 - sum);
}

/// incomplete integral of the first kind F(phi | m), any real amplitude,
/// reduced with F(phi + pi | m) = F(phi | m) + 2 K(m)
inline double ellip_f(double phi, double m) {
    detail::require_param(m);
    const double pi = 3.1415926535897932384626433832795;
    const double k = std::round(phi / pi);
    const double phr = phi - k * pi;
    double value = detail::f_principal(phr, m);
    if (k != 0.0) value += 2.0 * k * complete_k(m);
    return value;
}

/// incomplete integral of the second kind E(phi | m)
inline double ellip_e(double phi, double m) {
    detail::require_param(m);
    const double pi = 3.1415926535897932384626433832795;
    const double k = std::round(phi / pi);
    const double phr = phi - k * pi;
    double value = detail::e_principal(phr, m);
    if (k != 0.0) value += 2.0 * k * complete_e(m);
    return value;
}

/// Jacobi amplitude am(u, m): the inverse of phi -> F(phi | m).
/// Reduced with am(u + 2K | m) = am(u | m) + pi, then solved on [-K, K] by
/// safeguarded Newton (the derivative d am/du = sqrt(1 - m sin^2 am) is
/// bounded in (0,1], so Newton from the linear guess converges fast; the
/// bracket [-pi/2, pi/2] catches m near 1).
inline double jacobi_am(double u, double m) {
    detail::require_param(m);
    const double pi = 3.1415926535897932384626433832795;
    const double K = complete_k(m);
    const double n = std::round(u / (2.0 * K));
    const double ur = u - 2.0 * n * K;

    double lo = -0.5 * pi, hi = 0.5 * pi;
    double phi = 0.5 * pi * ur / K;  // exact for m = 0
    for (int it = 0; it < 100; ++it) {
        const double g = detail::f_principal(phi, m) - ur;
        if (g > 0.0) hi = phi;
        else lo = phi;
        const double s = std::sin(phi);
        const double step = -g * std::sqrt(1.0 - m * s * s);
        double next = phi + step;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - phi) < 1e-15) {
            phi = next;
            break;
        }
        phi = next;
    }
    return phi + n * pi;
}

}  // namespace lvlab::elliptic
