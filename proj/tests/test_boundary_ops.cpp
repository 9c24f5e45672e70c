#include <cstdio>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>
#include <omp.h>

#include "dshell/boundary_ops.hpp"

using namespace dshell;

namespace {

const SurfaceMesh& sphere(std::size_t n) {
    static std::map<std::size_t, SurfaceMesh> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, make_sphere(1.0, n)).first;
    return it->second;
}

CMatrix blockdiag(std::size_t n, const Mat4& M) {
    CMatrix D = CMatrix::Zero(long(4 * n), long(4 * n));
    for (std::size_t i = 0; i < n; ++i) D.block<4, 4>(long(4 * i), long(4 * i)) = M;
    return D;
}

} // namespace

TEST(BoundaryOps, MultiplicationBlocks) {
    const Vec3 N(0, 0, 1);
    const ElectroScalar e{3.0, 1.0, 0.0};
    // (eps -+ mu beta)/(eps^2 - mu^2)
    EXPECT_LT((multiplication_block(e, N, Branch::plus) - (3.0 * id4() - beta()) / 8.0).norm(), 1e-15);
    EXPECT_LT((multiplication_block(e, N, Branch::minus) - (3.0 * id4() + beta()) / 8.0).norm(), 1e-15);
    const AnomalousMagnetic am{0.0, 2.0};
    EXPECT_LT((multiplication_block(am, N, Branch::plus) - I_unit * beta() * alpha(2) / 2.0).norm(), 1e-15);
    const Projected pr{0.5, -1};
    EXPECT_LT((multiplication_block(pr, N, Branch::plus) - mit_projector(-1)).norm(), 1e-15);
}

TEST(BoundaryOps, CouplingValidation) {
    EXPECT_THROW(validate(Coupling(ElectroScalar{1.0, 1.0, 0.0})), Error);
    EXPECT_THROW(validate(Coupling(AnomalousMagnetic{0.0, 0.0})), Error);
    EXPECT_THROW(validate(Coupling(Projected{0.0, 1})), Error);
    EXPECT_NO_THROW(validate(Coupling(ElectroScalar{0.0, -2.0, 0.0})));
    try {
        validate(Coupling(ElectroScalar{1.0, 1.0, 0.0}));
    } catch (const Error& err) {
        EXPECT_EQ(err.kind, ErrorKind::invalid_coupling);
    }
    // critical couplings are valid operators; the run layer gates them
    EXPECT_NO_THROW(validate(Coupling(ElectroScalar{2.5, 1.5, 0.0})));
}

TEST(BoundaryOps, IdentitiesOnCoarseSphere) {
    const auto& mesh = sphere(256);
    const auto rep = operator_identities(mesh, 0.3, 1.0, Coupling(ElectroScalar{1.3, 0.4, 0.7}));
    EXPECT_GT(rep.mesh_tol, 0.05);
    EXPECT_LT(rep.psi_relation, rep.mesh_tol);
    EXPECT_LT(rep.gamma5_relation, rep.mesh_tol);
    EXPECT_LT(rep.squared_identity, rep.mesh_tol);
    ASSERT_TRUE(rep.product_expansion.has_value());
    EXPECT_LT(*rep.product_expansion, 1e-12);
    EXPECT_LT(rep.hermiticity_cauchy, 1e-12);
    EXPECT_LT(*rep.hermiticity_lambda_plus, 1e-12);
    EXPECT_LT(*rep.hermiticity_lambda_minus, 1e-12);
}

TEST(BoundaryOps, AnomalousProductExpansion) {
    const auto rep = operator_identities(sphere(128), -0.4, 1.0, Coupling(AnomalousMagnetic{0.7, 1.1}), 2);
    ASSERT_TRUE(rep.product_expansion.has_value());
    EXPECT_LT(*rep.product_expansion, 1e-12);
}

TEST(BoundaryOps, SquaredIdentityImprovesWithRefinement) {
    const SpectralParameter p{cplx(0.2, 0.0), 1.0};
    const double r1 = squared_identity_residual(sphere(128), assemble_layers(sphere(128), p));
    const double r2 = squared_identity_residual(sphere(512), assemble_layers(sphere(512), p));
    EXPECT_LT(r2, r1);
}

TEST(BoundaryOps, IdentitiesRejectOutOfGapEnergy) {
    EXPECT_THROW(operator_identities(sphere(64), 1.0, 1.0), Error);
}

// C(conj z) = C(z)^H on an equal-weight mesh.
TEST(BoundaryOps, CauchyAdjointIsConjugateEnergy) {
    const auto& mesh = sphere(96);
    const CMatrix C1 = cauchy_matrix(assemble_layers(mesh, {cplx(0.3, 0.6), 1.0}));
    const CMatrix C2 = cauchy_matrix(assemble_layers(mesh, {cplx(0.3, -0.6), 1.0}));
    EXPECT_LT((C1.adjoint() - C2).norm() / C1.norm(), 1e-13);
}

TEST(BoundaryOps, MatrixFreeMatchesDense) {
    const auto& mesh = sphere(80);
    const auto L = assemble_layers(mesh, {cplx(-0.2, 0.0), 1.0});
    const auto v = probe_vectors(mesh.size(), 1)[0];
    for (const Coupling c : {Coupling(ElectroScalar{2.0, 0.5, 0.3}), Coupling(AnomalousMagnetic{0.2, 2.0}),
                             Coupling(Projected{0.8, 1})})
        for (Branch b : {Branch::plus, Branch::minus}) {
            const CVector dense = lambda_matrix(mesh, L, c, b) * v;
            EXPECT_LT((dense - apply_lambda(mesh, L, c, b, v)).norm() / dense.norm(), 1e-13);
        }
    EXPECT_LT((cauchy_matrix(L) * v - apply_cauchy(L, v)).norm() / v.norm(), 1e-13);
}

// Lambda^a_{+,k} U = -U conj(Lambda^{-a}_{+,k~}) and Lambda^a_{+,k} T = T Lambda^{-a}_{-,k}.
TEST(BoundaryOps, DiscreteChargeConjugationAndTSymmetry) {
    const auto& mesh = sphere(64);
    const ElectroScalar k{1.3, 0.4, 0.7};
    const double a = 0.37;
    const CMatrix L1 = lambda_matrix(mesh, assemble_layers(mesh, {cplx(a, 0), 1.0}), k, Branch::plus);
    const CMatrix L2 = lambda_matrix(mesh, assemble_layers(mesh, {cplx(-a, 0), 1.0}), mirrored(k), Branch::plus);
    const CMatrix Lm = lambda_matrix(mesh, assemble_layers(mesh, {cplx(-a, 0), 1.0}), k, Branch::minus);
    const CMatrix UU = blockdiag(mesh.size(), charge_conjugation_factor());
    const CMatrix TT = blockdiag(mesh.size(), t_transform_matrix());
    EXPECT_LT((L1 * UU + UU * L2.conjugate()).norm() / L1.norm(), 1e-12);
    EXPECT_LT((L1 * TT - TT * Lm).norm() / L1.norm(), 1e-12);
}

TEST(BoundaryOps, ProjectedCompression) {
    const auto idx = projected_indices(3, 1);
    EXPECT_EQ(idx, (std::vector<long>{0, 1, 4, 5, 8, 9}));
    EXPECT_EQ(projected_indices(2, -1), (std::vector<long>{2, 3, 6, 7}));
    CMatrix A = CMatrix::Random(12, 12);
    const CMatrix B = compress(A, idx);
    ASSERT_EQ(B.rows(), 6);
    EXPECT_EQ(B(2, 3), A(4, 5));
}

TEST(BoundaryOps, FieldSolvesDiracEquationOffSurface) {
    const auto& mesh = sphere(128);
    const SpectralParameter p{cplx(0.4, 0.2), 1.0};
    const CVector g = smooth_test_densities(mesh)[2];
    for (const Vec3& x : {Vec3(0.1, 0.2, -0.1), Vec3(1.5, -0.4, 0.8)}) {
        auto F = [&](const Vec3& y) { return evaluate_field(mesh, g, p, y); };
        const Vec4 r = dirac_residual(F, x, p.z, p.m, 1e-3);
        EXPECT_LT(r.norm() / F(x).norm(), 1e-5);
    }
}

TEST(BoundaryOps, EvaluationTooCloseThrows) {
    const auto& mesh = sphere(128);
    const CVector g = smooth_test_densities(mesh)[0];
    try {
        evaluate_field(mesh, g, {cplx(0.0, 0.0), 1.0}, mesh.nodes[5] * (1.0 + 0.1 * mesh.h));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind, ErrorKind::too_close);
    }
    EXPECT_THROW(evaluate_field(mesh, CVector::Zero(8), {cplx(0.0, 0.0), 1.0}, Vec3(0, 0, 0)), Error);
}

// Jump relation: C_+ g - C_- g = -i alpha.N g, with the average equal to C g.
TEST(BoundaryOps, JumpAcrossSurface) {
    const auto& mesh = sphere(256);
    const SpectralParameter p{cplx(0.3, 0.0), 1.0};
    const CVector g = smooth_test_densities(mesh)[1];
    const NearFieldEvaluator ev(mesh, g, p);
    const CVector Cg = apply_cauchy(assemble_layers(mesh, p), g);
    double jump = 0.0, avg = 0.0, gmax = 0.0;
    for (std::size_t i = 0; i < mesh.size(); i += 8) {
        const auto [cp, cm] = ev.one_sided_limits(i);
        const Vec4 gi = g.segment<4>(long(4 * i));
        jump = std::max(jump, ((cp - cm) + I_unit * alpha_dot(mesh.normals[i]) * gi).norm());
        avg = std::max(avg, (0.5 * (cp + cm) - Vec4(Cg.segment<4>(long(4 * i)))).norm());
        gmax = std::max(gmax, gi.norm());
    }
    EXPECT_LT(jump / gmax, 0.05);
    EXPECT_LT(avg / gmax, 0.1);
}

TEST(BoundaryOps, NearFieldAgreesWithQuadratureAwayFromSurface) {
    const auto& mesh = sphere(256);
    const SpectralParameter p{cplx(0.3, 0.0), 1.0};
    const CVector g = smooth_test_densities(mesh)[3];
    const NearFieldEvaluator ev(mesh, g, p);
    const double s = 3.0 * ev.patch_radius();
    const Vec4 near = ev.along_normal(10, {s})[0];
    const Vec4 direct = field_quadrature(mesh, g, p, Vec3(mesh.nodes[10] - s * mesh.normals[10]));
    // the patch integrates the reconstructed density, the node sum the node values
    EXPECT_LT((near - direct).norm() / direct.norm(), 1e-4);
}

TEST(BoundaryOps, AssemblyIsThreadCountInvariant) {
    const auto& mesh = sphere(100);
    const SpectralParameter p{cplx(0.1, 0.3), 1.0};
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const CMatrix A = cauchy_matrix(assemble_layers(mesh, p));
    omp_set_num_threads(4);
    const CMatrix B = cauchy_matrix(assemble_layers(mesh, p));
    omp_set_num_threads(saved);
    EXPECT_EQ((A - B).cwiseAbs().maxCoeff(), 0.0);
}

TEST(BoundaryOps, ExportFormats) {
    const auto& mesh = sphere(16);
    const auto op = assemble_cauchy(mesh, {cplx(0.0, 0.0), 1.0});
    EXPECT_EQ(op.matrix.rows(), 64);
    const auto path = std::filesystem::temp_directory_path() / "dshell_export_test.bin";
    write_binary(op, path.string());
    EXPECT_EQ(std::filesystem::file_size(path), std::uintmax_t(64 * 64 * 16));
    std::FILE* f = std::fopen(path.string().c_str(), "rb");
    double buf[4];
    ASSERT_EQ(std::fread(buf, sizeof(double), 4, f), 4u);
    std::fclose(f);
    std::filesystem::remove(path);
    EXPECT_EQ(buf[2], op.matrix(0, 1).real());
    EXPECT_EQ(buf[3], op.matrix(0, 1).imag());

    std::ostringstream os;
    write_csv(op, os);
    std::istringstream is(os.str());
    std::string line;
    int rows = 0;
    while (std::getline(is, line)) {
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 127);
        ++rows;
    }
    EXPECT_EQ(rows, 64);
    EXPECT_THROW(write_binary(op, "/nonexistent_dir/x.bin"), Error);
}
