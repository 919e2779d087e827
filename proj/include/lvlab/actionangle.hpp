#pragma once

#include <cmath>
#include <mutex>
#include <unordered_map>
#include <utility>

#include "lvlab/elliptic.hpp"
#include "lvlab/errors.hpp"
#include "lvlab/macroode.hpp"
#include "lvlab/model.hpp"
#include "lvlab/quadrature.hpp"

namespace lvlab {

inline constexpr double TWO_PI = 6.283185307179586476925286766559;

struct ActionAngle {
    double h;      ///< conserved level; (0,1/16) linear-equivalent, (-inf,0) general
    double theta;  ///< angle in [0, 2pi)
};

namespace detail {

inline void require_lv(const Model& model) {
    if (!model.is_lv())
        fail(errc::non_monotone,
             "action-angle machinery needs phi1 strictly increasing and phi2 strictly decreasing");
}

inline void require_h(double h, const Model& model, HamiltonianKind kind) {
    require_lv(model);
    if (kind == HamiltonianKind::linear_equivalent) {
        if (!model.is_linear_pair())
            fail(errc::non_monotone, "linear_equivalent convention needs a linear LV pair");
        if (!(h > 0.0 && h < 1.0 / 16.0))
            fail(errc::range_error, "h must lie in (0, 1/16) in the linear convention");
    } else if (!(h < 0.0)) {
        fail(errc::range_error, "h must lie in (-inf, 0) in the general convention");
    }
}

inline double wrap_angle(double t) {
    double w = std::fmod(t, TWO_PI);
    if (w < 0.0) w += TWO_PI;
    return w;
}

}  // namespace detail

/// Quadrant-correct angle of (x,y) in [0, 2pi); the five-case arctangent.
inline double angle_of(double x, double y) {
    return detail::wrap_angle(std::atan2(y, x));
}

/// Integral of f over one turn of the angle.  The circle is split into eight
/// panels before the adaptive pass: orbit quantities repeat with period pi/2,
/// and a single Simpson estimate over [0, 2pi) would sample only one phase of
/// that pattern and accept it as converged.
template <class F>
double integrate_angle(F&& f, double abs_tol) {
    double acc = 0.0;
    for (int p = 0; p < 8; ++p) {
        const double a = TWO_PI * p / 8.0, b = TWO_PI * (p + 1) / 8.0;
        acc += integrate_adaptive(f, a, b, abs_tol / 8.0);
    }
    return acc;
}

// ── forward map ──────────────────────────────────────────────────────────────

inline ActionAngle to_action_angle(double x, double y, const Model& model, HamiltonianKind kind) {
    detail::require_lv(model);
    if (x == 0.0 && y == 0.0) fail(errc::origin_or_boundary, "the center carries no angle");
    if (!(std::abs(x) < 0.5 && std::abs(y) < 0.5))
        fail(errc::origin_or_boundary, "(x,y) must lie in the open square (-1/2,1/2)^2");
    const double h = hamiltonian({x + 0.5, y + 0.5}, model, kind);
    return {h, angle_of(x, y)};
}

// ── inverse map ──────────────────────────────────────────────────────────────

namespace detail {

/// closed-form inverse in the linear convention; the conjugate form
/// x^2 = (1-16h) cos^2(th) / (2 (1+R)) is free of the 0/0 at the axes
inline std::pair<double, double> from_aa_linear(double h, double theta) {
    const double mt = 1.0 - 16.0 * h;
    const double s = std::sin(theta), c = std::cos(theta);
    const double s2t = std::sin(2.0 * theta);
    const double R = std::sqrt(1.0 - mt * s2t * s2t);
    const double x = std::copysign(std::sqrt(mt * c * c / (2.0 * (1.0 + R))), c);
    const double y = std::copysign(std::sqrt(mt * s * s / (2.0 * (1.0 + R))), s);
    return {c == 0.0 ? 0.0 : x, s == 0.0 ? 0.0 : y};
}

/// general convention: solve H(rho cos th, rho sin th) = h along the ray.
/// H decreases strictly from 0 to -inf as rho goes from 0 to the boundary
/// (H is concave with maximum at the center), so the root is unique.
inline std::pair<double, double> from_aa_general_ray(double h, double theta, const Model& model) {
    const double c = std::cos(theta), s = std::sin(theta);
    const double rho_max = 0.5 / std::max(std::abs(c), std::abs(s));
    auto h_at = [&](double rho) {
        return hamiltonian({0.5 + rho * c, 0.5 + rho * s}, model, HamiltonianKind::general);
    };
    // bracket: push the outer end toward the boundary until h_at(hi) < h
    double lo = 0.0, hi = 0.0;  // h(lo) > h target (h(0)=0), need h(hi) < h
    bool bracketed = false;
    for (double margin = 1e-2; margin >= 1e-13; margin *= 1e-2) {
        hi = rho_max * (1.0 - margin);
        if (h_at(hi) < h) {
            bracketed = true;
            break;
        }
        lo = hi;
    }
    if (!bracketed)
        fail(errc::root_not_bracketed, "ray leaves the domain before reaching the level h");

    // bisection to ~1e-13 relative on rho
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (h_at(mid) > h) lo = mid;
        else hi = mid;
        if (hi - lo < 1e-13 * rho_max) break;
    }
    const double rho = 0.5 * (lo + hi);
    return {rho * c, rho * s};
}

}  // namespace detail

inline std::pair<double, double> from_action_angle(const ActionAngle& aa, const Model& model,
                                                   HamiltonianKind kind) {
    detail::require_h(aa.h, model, kind);
    const double theta = detail::wrap_angle(aa.theta);
    if (kind == HamiltonianKind::linear_equivalent) return detail::from_aa_linear(aa.h, theta);
    return detail::from_aa_general_ray(aa.h, theta, model);
}

// ── angular velocity, period, invariant measure ──────────────────────────────

struct AngularField {
    double F;       ///< angular speed, > 0 (the flow itself runs clockwise: theta' = -F)
    double period;  ///< T(h) = int_0^{2pi} dtheta / F(h, theta)
    double mu;      ///< invariant density 1/(T(h) F(h,theta))
};

/// F(h,theta) = [r1 psi1(1/2+y) y (1/4-x^2) - r2 psi2(1/2+x) x (1/4-y^2)] / (x^2+y^2),
/// evaluated at (x,y)(h,theta); reduces to (a r1 r2/2) sqrt(1-(1-16h) sin^2 2theta)
/// for linear pairs.
inline double angular_speed_at(double x, double y, const Model& model) {
    const double num = model.r(1) * model.psi(1, 0.5 + y).psi * y * (0.25 - x * x) -
                       model.r(2) * model.psi(2, 0.5 + x).psi * x * (0.25 - y * y);
    return num / (x * x + y * y);
}

inline double angular_speed(double h, double theta, const Model& model, HamiltonianKind kind) {
    if (kind == HamiltonianKind::linear_equivalent) {
        const double a = model.linear_slope();
        const double s2t = std::sin(2.0 * theta);
        return 0.5 * a * model.r(1) * model.r(2) *
               std::sqrt(1.0 - (1.0 - 16.0 * h) * s2t * s2t);
    }
    const auto [x, y] = from_action_angle({h, theta}, model, kind);
    return angular_speed_at(x, y, model);
}

namespace detail {

constexpr double PERIOD_QUAD_TOL = 1e-10;

struct PeriodKey {
    std::uint64_t model_hash;
    int kind;
    long long h_fixed;  ///< h rounded to 1e-12
    bool operator==(const PeriodKey& o) const {
        return model_hash == o.model_hash && kind == o.kind && h_fixed == o.h_fixed;
    }
};

struct PeriodKeyHash {
    std::size_t operator()(const PeriodKey& k) const {
        std::uint64_t h = k.model_hash ^ (0x9E3779B97F4A7C15ull * (k.h_fixed + 7 * k.kind));
        h ^= h >> 29;
        h *= 0xBF58476D1CE4E5B9ull;
        return static_cast<std::size_t>(h ^ (h >> 32));
    }
};

inline double period_uncached(double h, const Model& model, HamiltonianKind kind) {
    return integrate_angle([&](double th) { return 1.0 / angular_speed(h, th, model, kind); },
                           PERIOD_QUAD_TOL);
}

}  // namespace detail

/// Orbit period T(h); memoized (the general convention recomputes the inverse
/// map under the integral, which is worth caching across mu^h averages).
inline double period(double h, const Model& model, HamiltonianKind kind) {
    detail::require_h(h, model, kind);
    static std::unordered_map<detail::PeriodKey, double, detail::PeriodKeyHash> cache;
    static std::mutex mutex;
    const detail::PeriodKey key{model.hash(), static_cast<int>(kind),
                                std::llround(h * 1e12)};
    {
        std::lock_guard<std::mutex> lock(mutex);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    const double value = detail::period_uncached(h, model, kind);
    std::lock_guard<std::mutex> lock(mutex);
    cache.emplace(key, value);
    return value;
}

/// closed-form linear period 8 K(1-16h) / (a r1 r2); quadrature cross-check
/// lives in the tests
inline double period_linear_closed_form(double h, const Model& model) {
    detail::require_h(h, model, HamiltonianKind::linear_equivalent);
    return 8.0 * elliptic::complete_k(1.0 - 16.0 * h) /
           (model.linear_slope() * model.r(1) * model.r(2));
}

inline AngularField angular_field(const ActionAngle& aa, const Model& model, HamiltonianKind kind) {
    detail::require_h(aa.h, model, kind);
    const double F = angular_speed(aa.h, aa.theta, model, kind);
    const double T = period(aa.h, model, kind);
    return {F, T, 1.0 / (T * F)};
}

// ── closed-form angle flow (linear pairs) ────────────────────────────────────

/// theta(t) = -1/2 am(a r1 r2 t + k0 | 1-16h) with k0 = -F(2 theta0 | 1-16h);
/// h is conserved and theta decreases (theta' = -F).
inline ActionAngle theta_flow(const ActionAngle& aa0, const Model& model, double t) {
    detail::require_h(aa0.h, model, HamiltonianKind::linear_equivalent);
    const double mt = 1.0 - 16.0 * aa0.h;
    const double speed = model.linear_slope() * model.r(1) * model.r(2);
    const double k0 = -elliptic::ellip_f(2.0 * detail::wrap_angle(aa0.theta), mt);
    const double theta = -0.5 * elliptic::jacobi_am(speed * t + k0, mt);
    return {aa0.h, detail::wrap_angle(theta)};
}

}  // namespace lvlab
