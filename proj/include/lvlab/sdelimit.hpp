#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "lvlab/actionangle.hpp"
#include "lvlab/elliptic.hpp"
#include "lvlab/errors.hpp"
#include "lvlab/macroode.hpp"
#include "lvlab/model.hpp"
#include "lvlab/quadrature.hpp"
#include "lvlab/rng.hpp"

namespace lvlab {

// ── pointwise generator coefficients ─────────────────────────────────────────

/// Second-order expansion coefficients of the count-chain generator applied to
/// f(H, Theta), written in the convention of the (h, theta) chart:
///
///   N * G_N (f o phi) -> a_h f_h + a_hh f_hh + a_htheta f_htheta
///                        + [N(-F) + G] f_theta + a_thetatheta f_thetatheta
///
/// a_hh is the quadratic-variation rate of H (infinitesimal variance); a_h is
/// twice the infinitesimal mean of H (the symmetric second-difference carries
/// both of them, and this normalization keeps a_h / a_hh equal to 2 b / sigma^2
/// of the matching diffusion).
struct GeneratorCoefficients {
    double a_h;
    double a_hh;
    double a_htheta;
    double a_thetatheta;
    double G;  ///< order-1 angular drift correction
    double F;  ///< angular speed (theta' = -F along the macroscopic flow)
};

inline GeneratorCoefficients gn0_coeffs(double x, double y, const Model& model,
                                        HamiltonianKind kind = HamiltonianKind::general) {
    if (!(std::abs(x) < 0.5 && std::abs(y) < 0.5) || (x == 0.0 && y == 0.0))
        fail(errc::boundary_point, "coefficients are defined on the punctured open square");

    const PsiValues p1 = model.psi(1, 0.5 + y);
    const PsiValues p2 = model.psi(2, 0.5 + x);
    const double r1 = model.r(1), r2 = model.r(2);
    const double qx = 0.25 - x * x, qy = 0.25 - y * y;

    double Hx, Hxx, Hy, Hyy;
    if (kind == HamiltonianKind::general) {
        Hx = p2.psi / (r1 * qx);
        Hxx = p2.psi_prime / (r1 * qx) + p2.psi * 2.0 * x / (r1 * qx * qx);
        Hy = -p1.psi / (r2 * qy);
        Hyy = -p1.psi_prime / (r2 * qy) - p1.psi * 2.0 * y / (r2 * qy * qy);
    } else {
        if (!model.is_linear_pair())
            fail(errc::non_monotone, "linear_equivalent coefficients need a linear LV pair");
        Hx = -2.0 * x * qy;
        Hxx = -2.0 * qy;
        Hy = -2.0 * y * qx;
        Hyy = -2.0 * qx;
    }

    const double rho2 = x * x + y * y;
    const double Tx = -y / rho2, Ty = x / rho2;
    const double Txx = 2.0 * x * y / (rho2 * rho2), Tyy = -Txx;

    const double A1 = qx * p1.psi_plus;  // second-order weight of the x-direction
    const double A2 = qy * p2.psi_plus;

    GeneratorCoefficients c;
    c.a_h = A1 * Hxx + A2 * Hyy;
    c.a_hh = A1 * Hx * Hx + A2 * Hy * Hy;
    c.a_htheta = 2.0 * (A1 * Hx * Tx + A2 * Hy * Ty);
    c.a_thetatheta = A1 * Tx * Tx + A2 * Ty * Ty;
    c.G = A1 * Txx + A2 * Tyy;
    c.F = (r1 * p1.psi * y * qx - r2 * p2.psi * x * qy) / rho2;
    return c;
}

// ── mu^h averages ────────────────────────────────────────────────────────────

enum class CoeffMode { linear_closed_form, general_quadrature };

namespace detail {
// absolute quadrature tolerance of the mu^h averages: tight where the inverse
// map is closed-form, relaxed where every sample needs a ray solve
constexpr double AVERAGE_QUAD_TOL_LINEAR = 1e-12;
constexpr double AVERAGE_QUAD_TOL_GENERAL = 1e-8;
}

/// beta = 2 [a (r2 - r1) + 2 (b1 + b2)] of the linear pair
inline double linear_beta(const Model& model) {
    if (!model.is_linear_pair()) fail(errc::non_monotone, "beta is defined for linear LV pairs");
    const double a = model.linear_slope();
    const double b1 = model.phi(1, 0.0), b2 = model.phi(2, 0.0);
    return 2.0 * (a * (model.r(2) - model.r(1)) + 2.0 * (b1 + b2));
}

/// (a_bar_h, a_bar_hh): averages of the pointwise coefficients against the
/// invariant angle measure mu^h.
///
/// linear_closed_form evaluates the averages exactly:
///   a_bar_h(h)  = -beta h                 (a_h is constant on the orbit)
///   a_bar_hh(h) = (beta h / 8) [E(1-16h)/K(1-16h) - 16h]
/// general_quadrature integrates gn0_coeffs over the orbit; run on a linear
/// pair it must reproduce the closed forms (the standing cross-validation).
inline std::pair<double, double> averaged_coeffs(double h, const Model& model, CoeffMode mode,
                                                 HamiltonianKind kind) {
    detail::require_h(h, model, kind);
    if (mode == CoeffMode::linear_closed_form) {
        if (kind != HamiltonianKind::linear_equivalent || !model.is_linear_pair())
            fail(errc::non_monotone, "closed-form averages need the linear convention");
        const double beta = linear_beta(model);
        const double m = 1.0 - 16.0 * h;
        const double ratio = elliptic::complete_e(m) / elliptic::complete_k(m);
        return {-beta * h, beta * h / 8.0 * (ratio - 16.0 * h)};
    }
    const double T = period(h, model, kind);
    const double tol = (kind == HamiltonianKind::linear_equivalent)
                           ? detail::AVERAGE_QUAD_TOL_LINEAR
                           : detail::AVERAGE_QUAD_TOL_GENERAL;
    auto integrand = [&](double th, bool second) {
        const auto [x, y] = from_action_angle({h, th}, model, kind);
        const GeneratorCoefficients c = gn0_coeffs(x, y, model, kind);
        return (second ? c.a_hh : c.a_h) / (T * c.F);
    };
    const double ah = integrate_angle([&](double th) { return integrand(th, false); }, tol);
    const double ahh = integrate_angle([&](double th) { return integrand(th, true); }, tol);
    return {ah, ahh};
}

// ── the one-dimensional limit SDE ────────────────────────────────────────────

/// Drift and squared diffusion of the limiting H equation
///   dH = drift(H) dt + sqrt(diffusion_sq(H)) dB
/// with drift = a_bar_h / 2 and diffusion_sq = a_bar_hh (a_bar_h is twice the
/// infinitesimal mean, a_bar_hh exactly the infinitesimal variance; the tiny-N
/// generator oracle in the tests pins both normalizations).
class SdeCoefficients {
public:
    static SdeCoefficients make(const Model& model, CoeffMode mode,
                                HamiltonianKind kind = HamiltonianKind::linear_equivalent) {
        SdeCoefficients c;
        c.model_ = model;
        c.mode_ = mode;
        c.kind_ = kind;
        if (mode == CoeffMode::linear_closed_form) {
            c.beta_ = linear_beta(model);
            if (!(c.beta_ > 0.0))
                fail(errc::range_error,
                     "beta = 2[a(r2-r1)+2(b1+b2)] must be positive; refusing a negative drift "
                     "scale");
        }
        if (kind == HamiltonianKind::linear_equivalent) {
            c.l_ = 0.0;
            c.r_ = 1.0 / 16.0;
        } else {
            c.l_ = -std::numeric_limits<double>::infinity();
            c.r_ = 0.0;
        }
        return c;
    }

    double a_bar_h(double h) const { return averaged_coeffs(h, model_, mode_, kind_).first; }
    double a_bar_hh(double h) const { return averaged_coeffs(h, model_, mode_, kind_).second; }

    double drift(double h) const { return 0.5 * a_bar_h(h); }
    double diffusion_sq(double h) const { return a_bar_hh(h); }

    std::pair<double, double> interval() const { return {l_, r_}; }
    double beta() const { return beta_; }
    const Model& model() const { return model_; }
    HamiltonianKind kind() const { return kind_; }
    CoeffMode mode() const { return mode_; }

private:
    SdeCoefficients() : model_(Model::validate(Linear{0.0, 1.0}, Linear{0.0, 1.0}, {})) {}

    Model model_;
    CoeffMode mode_ = CoeffMode::linear_closed_form;
    HamiltonianKind kind_ = HamiltonianKind::linear_equivalent;
    double beta_ = 0.0;
    double l_ = 0.0, r_ = 0.0;
};

// ── Euler–Maruyama with interval stopping ────────────────────────────────────

struct SdePath {
    std::vector<double> t;
    std::vector<double> h;
    int exit_side = 0;       ///< -1 exited left, +1 exited right, 0 ran to horizon
    double exit_time = 0.0;  ///< first-exit time, or the horizon if exit_side == 0
    double final_h = 0.0;    ///< stopped value; clamped to the boundary on exit
    long negative_clamps = 0;
};

/// Fixed-step Euler–Maruyama for dh = b dt + sqrt(s2) dB stopped at the first
/// exit from (l, r).  Slightly negative s2 from roundoff near the ends is
/// clamped to zero and counted; anything below -1e-12 is treated as a
/// coefficient bug.  The stopped value is clamped to the boundary that was
/// crossed, matching the continuous process whose paths hit it exactly.
template <class Drift, class DiffSq>
SdePath euler_maruyama(double h0, Drift&& b, DiffSq&& s2, std::pair<double, double> interval,
                       double T, double dt, Rng& rng, std::size_t record_stride = 1) {
    const auto [l, r] = interval;
    if (!(h0 > l && h0 < r)) fail(errc::range_error, "h0 must lie inside the stopping interval");
    if (!(dt > 0.0)) fail(errc::range_error, "dt must be positive");

    SdePath path;
    path.t.push_back(0.0);
    path.h.push_back(h0);

    double h = h0, t = 0.0;
    std::size_t step = 0;
    while (t < T) {
        const double step_dt = std::min(dt, T - t);
        double var = s2(h);
        if (var < 0.0) {
            if (var < -1e-12)
                fail(errc::range_error, "diffusion_sq went significantly negative: coefficient bug");
            ++path.negative_clamps;
            var = 0.0;
        }
        h += b(h) * step_dt + std::sqrt(var * step_dt) * rng.normal();
        t += step_dt;
        ++step;
        if (h <= l || h >= r) {
            path.exit_side = (h <= l) ? -1 : +1;
            path.exit_time = t;
            h = (h <= l) ? l : r;
            path.t.push_back(t);
            path.h.push_back(h);
            path.final_h = h;
            return path;
        }
        if (step % record_stride == 0) {
            path.t.push_back(t);
            path.h.push_back(h);
        }
    }
    if (path.t.back() != t) {
        path.t.push_back(t);
        path.h.push_back(h);
    }
    path.exit_side = 0;
    path.exit_time = T;
    path.final_h = h;
    return path;
}

inline SdePath euler_maruyama(double h0, const SdeCoefficients& coeffs,
                              std::pair<double, double> interval, double T, double dt, Rng& rng,
                              std::size_t record_stride = 1) {
    return euler_maruyama(
        h0, [&](double h) { return coeffs.drift(h); },
        [&](double h) { return coeffs.diffusion_sq(h); }, interval, T, dt, rng, record_stride);
}

// ── scale function and speed diagnostics ─────────────────────────────────────

namespace detail {

constexpr double SCALE_QUAD_TOL = 1e-8;

/// directed integral helper: int_c^z f, built on cumulative grids
template <class F>
double directed_integral(F&& f, double c, double z, double tol) {
    if (c == z) return 0.0;
    const double lo = std::min(c, z), hi = std::max(c, z);
    const auto cum = cumulative_integral(f, lo, hi, tol);
    const double v = cum.back();
    return (z > c) ? v : -v;
}

}  // namespace detail

/// p(z) = int_c^z exp{-2 int_c^u drift/diffusion_sq dh} du  (Karatzas–Shreve
/// scale function of the SDE in `coeffs`); p(center end) = +inf diagnoses the
/// unreachable side, boundedness at the consensus end the exit side.
inline double scale_function_p(double z, const SdeCoefficients& coeffs, double c) {
    const auto [l, r] = coeffs.interval();
    if (!(z > l && z < r && c > l && c < r))
        fail(errc::range_error, "scale function arguments must be interior");
    auto ratio = [&](double u) { return coeffs.drift(u) / coeffs.diffusion_sq(u); };
    const double lo = std::min(c, z), hi = std::max(c, z);
    if (lo == hi) return 0.0;
    const auto ratio_cum = cumulative_integral(ratio, lo, hi, detail::SCALE_QUAD_TOL);
    auto B = [&](double u) {  // int_c^u ratio
        const double at_u = eval_cumulative(ratio_cum, lo, hi, u);
        const double at_c = eval_cumulative(ratio_cum, lo, hi, c);
        return at_u - at_c;
    };
    return detail::directed_integral([&](double u) { return std::exp(-2.0 * B(u)); }, c, z,
                                     detail::SCALE_QUAD_TOL);
}

/// v(z) = int_c^z exp{-2 B(y)} int_c^y 2 exp{2 B(w)} / diffusion_sq(w) dw dy;
/// finite limits at an endpoint certify finite expected exit time through it.
inline double speed_v(double z, const SdeCoefficients& coeffs, double c) {
    const auto [l, r] = coeffs.interval();
    if (!(z > l && z < r && c > l && c < r))
        fail(errc::range_error, "speed function arguments must be interior");
    if (z == c) return 0.0;
    auto ratio = [&](double u) { return coeffs.drift(u) / coeffs.diffusion_sq(u); };
    const double lo = std::min(c, z), hi = std::max(c, z);
    const auto ratio_cum = cumulative_integral(ratio, lo, hi, detail::SCALE_QUAD_TOL);
    auto B = [&](double u) {
        return eval_cumulative(ratio_cum, lo, hi, u) - eval_cumulative(ratio_cum, lo, hi, c);
    };
    const auto inner_cum = cumulative_integral(
        [&](double w) { return 2.0 * std::exp(2.0 * B(w)) / coeffs.diffusion_sq(w); }, lo, hi,
        detail::SCALE_QUAD_TOL);
    auto M = [&](double y) {  // int_c^y inner
        return eval_cumulative(inner_cum, lo, hi, y) - eval_cumulative(inner_cum, lo, hi, c);
    };
    return detail::directed_integral([&](double y) { return std::exp(-2.0 * B(y)) * M(y); }, c, z,
                                     detail::SCALE_QUAD_TOL);
}

}  // namespace lvlab
