#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <utility>
#include <vector>

#include "lvlab/errors.hpp"
#include "lvlab/model.hpp"
#include "lvlab/quadrature.hpp"

namespace lvlab {

// ── state ────────────────────────────────────────────────────────────────────

struct MacroState {
    double m1 = 0.5;
    double m2 = 0.5;

    double x() const { return m1 - 0.5; }  ///< shifted view, origin at the center
    double y() const { return m2 - 0.5; }
    bool in_square() const { return m1 >= 0.0 && m1 <= 1.0 && m2 >= 0.0 && m2 <= 1.0; }
    bool interior() const { return m1 > 0.0 && m1 < 1.0 && m2 > 0.0 && m2 < 1.0; }
};

enum class HamiltonianKind {
    general,            ///< H = Psi1(m1) + Psi2(m2), normalized to 0 at the center; range (-inf, 0)
    linear_equivalent   ///< H = (1/4 - x^2)(1/4 - y^2); range (0, 1/16]; linear pairs only
};

// ── vector field ─────────────────────────────────────────────────────────────

/// (dm1/dt, dm2/dt) = (r1 m1(1-m1) psi1(m2), r2 m2(1-m2) psi2(m1))
inline std::pair<double, double> rhs(const MacroState& s, const Model& model) {
    const double f1 = model.r(1) * s.m1 * (1.0 - s.m1) * model.psi(1, s.m2).psi;
    const double f2 = model.r(2) * s.m2 * (1.0 - s.m2) * model.psi(2, s.m1).psi;
    return {f1, f2};
}

// ── conserved quantity ───────────────────────────────────────────────────────

namespace detail {
constexpr double HAMILTONIAN_QUAD_TOL = 1e-10;
}

inline double hamiltonian(const MacroState& s, const Model& model, HamiltonianKind kind) {
    if (!s.interior()) fail(errc::boundary_state, "Hamiltonian is defined on the open square only");
    if (kind == HamiltonianKind::linear_equivalent) {
        if (!model.is_linear_pair())
            fail(errc::non_monotone, "linear_equivalent Hamiltonian needs a linear LV pair");
        const double x = s.x(), y = s.y();
        return (0.25 - x * x) * (0.25 - y * y);
    }
    if (!model.is_monotone())
        fail(errc::non_monotone, "general Hamiltonian needs strictly monotone utilities");
    const double tol = detail::HAMILTONIAN_QUAD_TOL;
    const double i1 = integrate_adaptive(
        [&](double z) { return model.psi(2, z).psi / (model.r(1) * z * (1.0 - z)); }, 0.5, s.m1,
        tol);
    const double i2 = integrate_adaptive(
        [&](double w) { return model.psi(1, w).psi / (model.r(2) * w * (1.0 - w)); }, 0.5, s.m2,
        tol);
    return i1 - i2;
}

// ── fixed-step RK4 with dense output ────────────────────────────────────────

/// Uniform-grid path with stored derivatives; evaluation between nodes is
/// cubic Hermite, so interpolation error matches the integrator's O(dt^4).
class OdePath {
public:
    OdePath(double dt, std::vector<double> m1, std::vector<double> m2, std::vector<double> d1,
            std::vector<double> d2)
        : dt_(dt), m1_(std::move(m1)), m2_(std::move(m2)), d1_(std::move(d1)), d2_(std::move(d2)) {}

    double horizon() const { return dt_ * static_cast<double>(m1_.size() - 1); }
    double dt() const { return dt_; }
    std::size_t nodes() const { return m1_.size(); }
    MacroState node(std::size_t i) const { return {m1_[i], m2_[i]}; }
    double node_time(std::size_t i) const { return dt_ * static_cast<double>(i); }

    MacroState at(double t) const {
        if (t <= 0.0) return node(0);
        if (t >= horizon()) return node(m1_.size() - 1);
        const double u = t / dt_;
        const std::size_t i = static_cast<std::size_t>(u);
        const double s = u - static_cast<double>(i);
        return {hermite(m1_[i], m1_[i + 1], d1_[i], d1_[i + 1], s),
                hermite(m2_[i], m2_[i + 1], d2_[i], d2_[i + 1], s)};
    }

private:
    double hermite(double p0, double p1, double v0, double v1, double s) const {
        const double s2 = s * s, s3 = s2 * s;
        return (2.0 * s3 - 3.0 * s2 + 1.0) * p0 + (s3 - 2.0 * s2 + s) * dt_ * v0 +
               (-2.0 * s3 + 3.0 * s2) * p1 + (s3 - s2) * dt_ * v1;
    }

    double dt_;
    std::vector<double> m1_, m2_, d1_, d2_;
};

struct ConservationCheck {
    HamiltonianKind kind = HamiltonianKind::linear_equivalent;
    double tol = 1e-6;        ///< max |h(t) - h(0)| allowed along the path
    std::size_t stride = 1;   ///< check every stride-th node
};

constexpr double BOUNDARY_PENETRATION_TOL = 1e-9;

/// Classical RK4 with fixed step. The path is clamped to [0,1]^2; penetration
/// beyond BOUNDARY_PENETRATION_TOL is an error (the field is inward/tangent on
/// the boundary, so a good step size never triggers it).
inline OdePath integrate(const MacroState& s0, const Model& model, double T, double dt,
                         std::optional<ConservationCheck> check = {}) {
    if (!(dt > 0.0) || !(T >= 0.0)) fail(errc::range_error, "integrate needs dt > 0, T >= 0");
    if (!s0.in_square()) fail(errc::out_of_domain, "initial state outside [0,1]^2");

    const std::size_t n = static_cast<std::size_t>(std::ceil(T / dt - 1e-12));
    std::vector<double> m1(n + 1), m2(n + 1), d1(n + 1), d2(n + 1);
    MacroState s = s0;

    auto deriv = [&model](const MacroState& p) { return rhs(p, model); };
    auto clamp01 = [](double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); };

    double h0 = 0.0;
    if (check) h0 = hamiltonian(s0, model, check->kind);

    for (std::size_t i = 0;; ++i) {
        auto [f1, f2] = deriv(s);
        m1[i] = s.m1;
        m2[i] = s.m2;
        d1[i] = f1;
        d2[i] = f2;
        if (i == n) break;

        const double a1 = f1, a2 = f2;
        const auto [b1, b2] = deriv({s.m1 + 0.5 * dt * a1, s.m2 + 0.5 * dt * a2});
        const auto [c1, c2] = deriv({s.m1 + 0.5 * dt * b1, s.m2 + 0.5 * dt * b2});
        const auto [e1, e2] = deriv({s.m1 + dt * c1, s.m2 + dt * c2});
        double n1 = s.m1 + dt / 6.0 * (a1 + 2.0 * (b1 + c1) + e1);
        double n2 = s.m2 + dt / 6.0 * (a2 + 2.0 * (b2 + c2) + e2);

        if (n1 < -BOUNDARY_PENETRATION_TOL || n1 > 1.0 + BOUNDARY_PENETRATION_TOL ||
            n2 < -BOUNDARY_PENETRATION_TOL || n2 > 1.0 + BOUNDARY_PENETRATION_TOL)
            fail(errc::out_of_domain, "trajectory penetrated the boundary of [0,1]^2");
        s = {clamp01(n1), clamp01(n2)};

        if (check && (i + 1) % check->stride == 0 && s.interior()) {
            const double h = hamiltonian(s, model, check->kind);
            if (std::abs(h - h0) > check->tol)
                fail(errc::step_too_large, "Hamiltonian drift exceeded tolerance; reduce dt");
        }
    }
    return OdePath(dt, std::move(m1), std::move(m2), std::move(d1), std::move(d2));
}

// ── fixed points ─────────────────────────────────────────────────────────────

enum class FixedPointType { stable_node, unstable_node, saddle, center };

struct FixedPoint {
    MacroState point;
    std::complex<double> lambda1, lambda2;  ///< Jacobian eigenvalues
    FixedPointType type;
};

/// The five fixed points of the monotone system with Jacobian eigenvalues.
/// Corners have a diagonal Jacobian; the center solves
/// lambda^2 = (r1 r2)^2/4 * phi1'(r2/2) phi2'(r1/2).
inline std::vector<FixedPoint> fixed_points(const Model& model) {
    if (!model.is_monotone())
        fail(errc::non_monotone,
             "fixed-point census is guaranteed for strictly monotone utilities only");
    const double r1 = model.r(1), r2 = model.r(2);

    auto corner = [&](double a, double b) {
        const double l1 = r1 * (1.0 - 2.0 * a) * model.psi(1, b).psi;
        const double l2 = r2 * (1.0 - 2.0 * b) * model.psi(2, a).psi;
        FixedPointType t;
        if (l1 < 0.0 && l2 < 0.0) t = FixedPointType::stable_node;
        else if (l1 > 0.0 && l2 > 0.0) t = FixedPointType::unstable_node;
        else t = FixedPointType::saddle;
        return FixedPoint{{a, b}, {l1, 0.0}, {l2, 0.0}, t};
    };

    std::vector<FixedPoint> out;
    out.push_back(corner(0.0, 0.0));
    out.push_back(corner(0.0, 1.0));
    out.push_back(corner(1.0, 0.0));
    out.push_back(corner(1.0, 1.0));

    const double q = (r1 * r2) * (r1 * r2) / 4.0 * model.phi_prime(1, r2 / 2.0) *
                     model.phi_prime(2, r1 / 2.0);
    FixedPoint center{{0.5, 0.5}, {}, {}, FixedPointType::center};
    if (q < 0.0) {
        const double w = std::sqrt(-q);
        center.lambda1 = {0.0, w};
        center.lambda2 = {0.0, -w};
        center.type = FixedPointType::center;
    } else {
        const double w = std::sqrt(q);
        center.lambda1 = {w, 0.0};
        center.lambda2 = {-w, 0.0};
        center.type = FixedPointType::saddle;
    }
    out.push_back(center);
    return out;
}

}  // namespace lvlab
