#pragma once

#include <array>
#include <complex>

#include <Eigen/Dense>

namespace dshell {

using cplx = std::complex<double>;
using Mat4 = Eigen::Matrix4cd;
using Vec4 = Eigen::Vector4cd;
using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;

inline constexpr cplx I_unit{0.0, 1.0};

struct DiracMatrices {
    std::array<Mat4, 3> alpha;
    Mat4 beta;
    Mat4 gamma5;
};

namespace detail {

inline Mat4 block2(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b,
                   const Eigen::Matrix2cd& c, const Eigen::Matrix2cd& d) {
    Mat4 m;
    m << a, b, c, d;
    return m;
}

inline DiracMatrices build_dirac() {
    using M2 = Eigen::Matrix2cd;
    M2 s1, s2, s3;
    s1 << 0, 1, 1, 0;
    s2 << 0, -I_unit, I_unit, 0;
    s3 << 1, 0, 0, -1;
    const M2 id = M2::Identity(), z = M2::Zero();
    DiracMatrices d;
    d.alpha[0] = block2(z, s1, s1, z);
    d.alpha[1] = block2(z, s2, s2, z);
    d.alpha[2] = block2(z, s3, s3, z);
    d.beta = block2(id, z, z, -id);
    d.gamma5 = block2(z, id, id, z);
    return d;
}

} // namespace detail

// Standard representation: beta = diag(I2,-I2), alpha_k with Pauli blocks off the diagonal.
inline const DiracMatrices& dirac_matrices() {
    static const DiracMatrices d = detail::build_dirac();
    return d;
}

inline const Mat4& alpha(int k) { return dirac_matrices().alpha[static_cast<std::size_t>(k)]; }
inline const Mat4& beta() { return dirac_matrices().beta; }
inline const Mat4& gamma5() { return dirac_matrices().gamma5; }
inline Mat4 id4() { return Mat4::Identity(); }

inline Mat4 alpha_dot(const CVec3& v) {
    const auto& d = dirac_matrices();
    return v[0] * d.alpha[0] + v[1] * d.alpha[1] + v[2] * d.alpha[2];
}

inline Mat4 alpha_dot(const Vec3& v) { return alpha_dot(CVec3(v.cast<cplx>())); }

inline Mat4 anticommutator(const Mat4& a, const Mat4& b) { return a * b + b * a; }
inline Mat4 commutator(const Mat4& a, const Mat4& b) { return a * b - b * a; }

// Gamma_{m,a}(xi) = alpha.(xi1, xi2, 0) + m beta + a
inline Mat4 gamma_ma(double m, double a, double xi1, double xi2) {
    return alpha_dot(Vec3(xi1, xi2, 0.0)) + m * beta() + a * id4();
}

// Gamma_{+-i}(xi): third momentum component +-i sqrt(|xi|^2 + m^2 - a^2).
inline Mat4 gamma_pm_i(double m, double a, double xi1, double xi2, int sign) {
    const double k = std::sqrt(xi1 * xi1 + xi2 * xi2 + m * m - a * a);
    CVec3 p(xi1, xi2, cplx(0.0, sign * k));
    return alpha_dot(p) + m * beta() + a * id4();
}

// MIT-type projectors P_+- = (I +- beta)/2.
inline Mat4 mit_projector(int sign) { return 0.5 * (id4() + double(sign) * beta()); }

// Zigzag family P_{+-,v} = (I +- (v/2) beta)/2; a projector only for v = +-2.
inline Mat4 zigzag_projector(int sign, double upsilon) {
    return 0.5 * (id4() + double(sign) * (upsilon / 2.0) * beta());
}

enum class SymmetryKind { charge_conjugation, t_transform };

// i beta alpha_2, the linear factor of the antilinear charge conjugation.
inline Mat4 charge_conjugation_factor() { return I_unit * beta() * alpha(1); }

inline Mat4 t_transform_matrix() { return gamma5() * beta(); }

// C(f) = i beta alpha_2 conj(f)
inline Vec4 charge_conjugation(const Vec4& f) { return charge_conjugation_factor() * f.conjugate(); }

inline Vec4 t_transform(const Vec4& f) { return t_transform_matrix() * f; }

// The normal does not enter either transform; it is accepted so that callers can
// treat surface-attached symmetries uniformly.
inline Vec4 symmetry_transform(SymmetryKind kind, const Vec4& f, const Vec3& /*normal*/ = Vec3(0, 0, 1)) {
    return kind == SymmetryKind::charge_conjugation ? charge_conjugation(f) : t_transform(f);
}

} // namespace dshell
