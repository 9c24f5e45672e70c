#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "dshell/clifford.hpp"
#include "dshell/error.hpp"

namespace dshell {

struct SpectralParameter {
    cplx z{0.0, 0.0};
    double m = 1.0;
};

inline bool is_admissible(const SpectralParameter& p) {
    return p.m > 0.0 && !(p.z.imag() == 0.0 && std::abs(p.z.real()) >= p.m);
}

inline void require_admissible(const SpectralParameter& p) {
    if (!(p.m > 0.0)) fail(ErrorKind::invalid_argument, "mass must be positive");
    if (!is_admissible(p))
        fail(ErrorKind::inadmissible_energy,
             "z = " + std::to_string(p.z.real()) + " lies on (-inf,-m] U [m,inf)");
}

// k = sqrt(z^2 - m^2) with Im k > 0.  The gap and the nonreal plane are handled
// separately; the principal root would land on the wrong sheet for part of the plane.
inline cplx sqrt_branch(const SpectralParameter& p) {
    require_admissible(p);
    const double m = p.m;
    if (p.z.imag() == 0.0) {
        const double a = p.z.real();
        return {0.0, std::sqrt(m * m - a * a)};
    }
    cplx k = std::sqrt(p.z * p.z - m * m);
    if (k.imag() < 0.0) k = -k;
    return k;
}

// Decay rate Im k; equals sqrt(m^2 - a^2) in the gap.
inline double decay_rate(const SpectralParameter& p) { return sqrt_branch(p).imag(); }

namespace detail {

inline void require_nonzero(const Vec3& x, const char* what) {
    if (x.norm() == 0.0) fail(ErrorKind::invalid_argument, std::string(what) + ": x = 0 is singular");
}

// phi^z(x) with k precomputed; no argument checks.
inline Mat4 phi_k(cplx z, double m, cplx k, const Vec3& x) {
    const double r = x.norm();
    const cplx e = std::exp(I_unit * k * r) / (4.0 * std::numbers::pi * r);
    const cplx c = (1.0 - I_unit * k * r) * I_unit / (r * r);
    const auto& d = dirac_matrices();
    Mat4 out = z * id4() + m * d.beta;
    for (int j = 0; j < 3; ++j) out += (c * x[j]) * d.alpha[static_cast<std::size_t>(j)];
    return e * out;
}

inline cplx psi_k(cplx k, double r) { return std::exp(I_unit * k * r) / (4.0 * std::numbers::pi * r); }

} // namespace detail

// Fundamental solution of (H - z), H = -i alpha.grad + m beta.
inline Mat4 phi_z(const SpectralParameter& p, const Vec3& x) {
    detail::require_nonzero(x, "phi_z");
    return detail::phi_k(p.z, p.m, sqrt_branch(p), x);
}

// Fundamental solution of (-Delta + m^2 - z^2).
inline cplx psi_z(const SpectralParameter& p, const Vec3& x) {
    detail::require_nonzero(x, "psi_z");
    return detail::psi_k(sqrt_branch(p), x.norm());
}

// Kernel of {alpha.N, C^a} minus its 2a (alpha.N) S^a part.
inline Mat4 k_a_kernel(double a, double m, const Vec3& x, const Vec3& y, const Vec3& nx, const Vec3& ny) {
    if (!(std::abs(a) < m)) fail(ErrorKind::inadmissible_energy, "k_a_kernel needs |a| < m");
    const Vec3 d = x - y;
    if (d.norm() == 0.0) fail(ErrorKind::invalid_argument, "k_a_kernel: x = y");
    const SpectralParameter p{cplx(a, 0.0), m};
    const double kap = std::sqrt(m * m - a * a);
    const double r = d.norm();
    const cplx scal = std::exp(-kap * r) / (2.0 * I_unit * std::numbers::pi * r * r * r) * (1.0 + kap * r) * nx.dot(d);
    return phi_z(p, d) * alpha_dot(Vec3(ny - nx)) - scal * id4();
}

// (-i alpha.grad + m beta - z) F at x by centered differences; F maps R^3 to 4x4 or 4x1.
template <class F>
auto dirac_residual(F&& f, const Vec3& x, cplx z, double m, double h) {
    using R = std::decay_t<decltype(f(x))>;
    R out = (m * beta()) * f(x) - z * f(x);
    for (int k = 0; k < 3; ++k) {
        Vec3 e = Vec3::Zero();
        e[k] = h;
        R df = (f(Vec3(x + e)) - f(Vec3(x - e))) / (2.0 * h);
        out += (-I_unit * alpha(k)) * df;
    }
    return out;
}

// (-Delta + m^2 - z^2) u at x by the 7-point stencil.
template <class F>
cplx helmholtz_residual(F&& u, const Vec3& x, cplx z, double m, double h) {
    cplx lap = -6.0 * u(x);
    for (int k = 0; k < 3; ++k) {
        Vec3 e = Vec3::Zero();
        e[k] = h;
        lap += u(Vec3(x + e)) + u(Vec3(x - e));
    }
    lap /= h * h;
    return -lap + (m * m - z * z) * u(x);
}

} // namespace dshell
