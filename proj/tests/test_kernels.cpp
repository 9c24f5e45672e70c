#include <random>

#include <gtest/gtest.h>

#include "dshell/kernels.hpp"

using namespace dshell;

TEST(Kernels, Admissibility) {
    EXPECT_TRUE(is_admissible({cplx(0.5, 0.0), 1.0}));
    EXPECT_TRUE(is_admissible({cplx(3.0, 0.1), 1.0}));
    EXPECT_FALSE(is_admissible({cplx(1.0, 0.0), 1.0}));
    EXPECT_FALSE(is_admissible({cplx(-2.0, 0.0), 1.0}));
    EXPECT_FALSE(is_admissible({cplx(0.0, 0.0), 0.0}));
    try {
        require_admissible({cplx(1.5, 0.0), 1.0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind, ErrorKind::inadmissible_energy);
    }
}

TEST(Kernels, SqrtBranchInGap) {
    const cplx k = sqrt_branch({cplx(0.6, 0.0), 1.0});
    EXPECT_DOUBLE_EQ(k.real(), 0.0);
    EXPECT_NEAR(k.imag(), 0.8, 1e-15);
    EXPECT_NEAR(decay_rate({cplx(0.0, 0.0), 2.0}), 2.0, 1e-15);
}

TEST(Kernels, SqrtBranchUpperHalfPlane) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int t = 0; t < 200; ++t) {
        const SpectralParameter p{cplx(u(rng), u(rng)), 0.2 + std::abs(u(rng))};
        if (!is_admissible(p)) continue;
        const cplx k = sqrt_branch(p);
        EXPECT_GT(k.imag(), 0.0);
        EXPECT_LT(std::abs(k * k - (p.z * p.z - p.m * p.m)), 1e-12 * (1.0 + std::norm(p.z)));
    }
}

TEST(Kernels, PhiSolvesDiracEquationOffOrigin) {
    const double h = 1e-4;
    for (const SpectralParameter p : {SpectralParameter{cplx(0.3, 0.0), 1.0}, SpectralParameter{cplx(0.2, 0.7), 1.3}}) {
        for (const Vec3& x : {Vec3(0.4, -0.3, 0.5), Vec3(-1.0, 0.2, 0.1)}) {
            const Mat4 r = dirac_residual([&](const Vec3& y) { return phi_z(p, y); }, x, p.z, p.m, h);
            EXPECT_LT(r.norm() / phi_z(p, x).norm(), 1e-5);
        }
    }
}

TEST(Kernels, PsiSolvesHelmholtz) {
    const SpectralParameter p{cplx(0.1, 0.4), 1.0};
    const Vec3 x(0.3, 0.2, -0.6);
    const cplx r = helmholtz_residual([&](const Vec3& y) { return psi_z(p, y); }, x, p.z, p.m, 1e-3);
    EXPECT_LT(std::abs(r) / std::abs(psi_z(p, x)), 1e-5);
}

// Property: phi^z(x)^H = phi^{conj z}(-x).
TEST(Kernels, PhiAdjointSymmetry) {
    const SpectralParameter p{cplx(0.2, 0.5), 1.0}, pb{cplx(0.2, -0.5), 1.0};
    const Vec3 x(0.3, -0.1, 0.7);
    EXPECT_LT((phi_z(p, x).adjoint() - phi_z(pb, Vec3(-x))).norm(), 1e-14);
}

TEST(Kernels, PhiDecaysAtGapRate) {
    const SpectralParameter p{cplx(0.6, 0.0), 1.0};
    const Vec3 d(0.0, 0.0, 1.0);
    const double r1 = 5.0, r2 = 6.0;
    // |phi| ~ e^{-0.8 r}(c/r + c'/r^2); compare r |phi| at two radii
    const double ratio = (r2 * phi_z(p, r2 * d).norm()) / (r1 * phi_z(p, r1 * d).norm());
    EXPECT_NEAR(std::log(ratio), -0.8, 0.05);
}

TEST(Kernels, SingularArgumentsThrow) {
    const SpectralParameter p{cplx(0.0, 0.0), 1.0};
    EXPECT_THROW(phi_z(p, Vec3::Zero()), Error);
    EXPECT_THROW(psi_z(p, Vec3::Zero()), Error);
    EXPECT_THROW(k_a_kernel(1.2, 1.0, Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)), Error);
}

// On a sphere the kernel of {alpha.N, C^a} - 2a alpha.N S^a stays bounded at the
// diagonal, while phi^a itself blows up like 1/r^2.
TEST(Kernels, KaKernelIsWeaklySingular) {
    const double a = 0.3, m = 1.0;
    const Vec3 x(0.0, 0.0, 1.0);
    double prev = 0.0;
    for (double t : {1e-2, 1e-3, 1e-4}) {
        const Vec3 y(std::sin(t), 0.0, std::cos(t));
        const double r = (x - y).norm();
        const double val = k_a_kernel(a, m, x, y, x, y).norm();
        if (prev > 0.0) {
            EXPECT_NEAR(val / prev, 1.0, 0.05);
        }
        prev = val;
        EXPECT_GT(r * r * phi_z({cplx(a, 0.0), m}, Vec3(x - y)).norm(), 0.05);
    }
}
