#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "dshell/clifford.hpp"
#include "dshell/coupling.hpp"
#include "dshell/error.hpp"
#include "dshell/kernels.hpp"
#include "dshell/quadrature.hpp"
#include "dshell/surface.hpp"

namespace dshell {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using NodeSpinors = Eigen::Matrix<cplx, Eigen::Dynamic, 4, Eigen::RowMajor>;

// Node-local multiplication part of Lambda_+- (without the projector sandwich).
inline Mat4 multiplication_block(const Coupling& c, const Vec3& normal, Branch b) {
    const double sg = b == Branch::plus ? 1.0 : -1.0;
    const Mat4 aN = alpha_dot(normal);
    if (auto* e = std::get_if<ElectroScalar>(&c)) {
        const double s = sgn_kappa(*e);
        return (e->eps * id4() - sg * (e->mu * beta() + e->eta * aN)) / s;
    }
    if (auto* a = std::get_if<AnomalousMagnetic>(&c)) {
        const double q = a->zeta * a->zeta + a->upsilon * a->upsilon;
        return (a->zeta * gamma5() + I_unit * a->upsilon * beta() * aN) / q;
    }
    const auto& p = std::get<Projected>(c);
    return mit_projector(p.sign) / (2.0 * p.eps);
}

// ---------------------------------------------------------------------------
// Layer parts

// Smoothing lengths j * delta0 (j = 1, 2, 3) combined with weights that cancel
// the O(delta) and O(delta^3) terms of the regularization error.
inline constexpr std::array<double, 3> kRichardsonWeights{2.5, -2.0, 0.5};

// S_ij and D_ij (row-scaled by the quadrature weight w_j) of
// C^z = (z + m beta) S + i alpha.D, with S the single layer and D the vector kernel
// e^{ikr}(1 - ikr)/(4 pi r^3) (x_i - x_j).
struct LayerParts {
    CMatrix S;
    std::array<CMatrix, 3> D;
    SpectralParameter p;
    std::string mesh_id;
    std::size_t n = 0;
};

namespace detail {

inline double smooth_s(double q) {
    return std::erf(q) - 2.0 / std::sqrt(std::numbers::pi) * q * std::exp(-q * q);
}
// 1 - smooth_s(q), computed without cancellation.
inline double smooth_s_tail(double q) {
    return std::erfc(q) + 2.0 / std::sqrt(std::numbers::pi) * q * std::exp(-q * q);
}

} // namespace detail

inline LayerParts assemble_layers(const SurfaceMesh& mesh, const SpectralParameter& p, double delta0 = 0.0) {
    require_admissible(p);
    const cplx k = sqrt_branch(p);
    const auto n = mesh.size();
    const double d0 = delta0 > 0.0 ? delta0 : mesh.spacing;
    LayerParts L;
    L.p = p;
    L.mesh_id = mesh.id;
    L.n = n;
    L.S.resize(long(n), long(n));
    for (auto& d : L.D) d.resize(long(n), long(n));
    const double four_pi = 4.0 * std::numbers::pi;
    double diag_reg = 0.0;
    for (int l = 0; l < 3; ++l)
        diag_reg += kRichardsonWeights[std::size_t(l)] / (2.0 * std::pow(std::numbers::pi, 1.5) * (l + 1) * d0);

#pragma omp parallel for schedule(static)
    for (long i = 0; i < long(n); ++i) {
        const Vec3& xi = mesh.nodes[std::size_t(i)];
        for (long j = 0; j < long(n); ++j) {
            const double w = mesh.weights[std::size_t(j)];
            if (i == j) {
                L.S(i, j) = w * (diag_reg + I_unit * k / four_pi);
                for (auto& d : L.D) d(i, j) = 0.0;
                continue;
            }
            const Vec3 d = xi - mesh.nodes[std::size_t(j)];
            const double r = d.norm();
            const cplx e = std::exp(I_unit * k * r);
            double tail1 = 0.0, tail2 = 0.0;
            for (int l = 0; l < 3; ++l) {
                const double q = r / ((l + 1) * d0);
                tail1 += kRichardsonWeights[std::size_t(l)] * std::erfc(q);
                tail2 += kRichardsonWeights[std::size_t(l)] * detail::smooth_s_tail(q);
            }
            L.S(i, j) = w * (e - tail1) / (four_pi * r);
            const cplx c = w * (e * (1.0 - I_unit * k * r) - tail2) / (four_pi * r * r * r);
            for (int q = 0; q < 3; ++q) L.D[std::size_t(q)](i, j) = c * d[q];
        }
    }
    return L;
}

inline Mat4 cauchy_block(const LayerParts& L, long i, long j) {
    const cplx s = L.S(i, j);
    Mat4 b = (L.p.z * s) * id4() + (L.p.m * s) * beta();
    for (int q = 0; q < 3; ++q) b += (I_unit * L.D[std::size_t(q)](i, j)) * alpha(q);
    return b;
}

// y = C x, both stored node-major (4 entries per node).
inline CVector apply_cauchy(const LayerParts& L, const CVector& x) {
    const long n = long(L.n);
    Eigen::Map<const NodeSpinors> X(x.data(), n, 4);
    NodeSpinors SX = L.S * X;
    NodeSpinors Y = SX * (L.p.z * id4() + L.p.m * beta()).transpose();
    for (int q = 0; q < 3; ++q) {
        NodeSpinors DX = L.D[std::size_t(q)] * X;
        Y += DX * (I_unit * alpha(q)).transpose();
    }
    CVector y(4 * n);
    Eigen::Map<NodeSpinors>(y.data(), n, 4) = Y;
    return y;
}

inline CVector apply_single_layer(const LayerParts& L, const CVector& x) {
    const long n = long(L.n);
    Eigen::Map<const NodeSpinors> X(x.data(), n, 4);
    CVector y(4 * n);
    Eigen::Map<NodeSpinors>(y.data(), n, 4) = L.S * X;
    return y;
}

// Apply a node-dependent 4x4 block to each node spinor.
template <class BlockFn>
CVector apply_nodewise(std::size_t n, const CVector& x, BlockFn&& block) {
    CVector y(x.size());
    for (std::size_t i = 0; i < n; ++i) y.segment<4>(long(4 * i)) = block(i) * x.segment<4>(long(4 * i));
    return y;
}

// ---------------------------------------------------------------------------
// Dense operators

enum class OperatorKind {
    single_layer,
    cauchy,
    lambda_plus,
    lambda_minus,
    anticomm_beta,
    anticomm_alphaN,
    comm_beta_alphaN,
    comm_gamma5
};

inline const char* to_string(OperatorKind k) {
    switch (k) {
    case OperatorKind::single_layer: return "single_layer";
    case OperatorKind::cauchy: return "cauchy";
    case OperatorKind::lambda_plus: return "lambda_plus";
    case OperatorKind::lambda_minus: return "lambda_minus";
    case OperatorKind::anticomm_beta: return "anticomm_beta";
    case OperatorKind::anticomm_alphaN: return "anticomm_alphaN";
    case OperatorKind::comm_beta_alphaN: return "comm_beta_alphaN";
    case OperatorKind::comm_gamma5: return "comm_gamma5";
    }
    return "unknown";
}

struct BoundaryOperator {
    CMatrix matrix;
    std::string mesh_id;
    SpectralParameter p;
    OperatorKind kind = OperatorKind::cauchy;
    std::optional<Coupling> coupling;
};

inline CMatrix cauchy_matrix(const LayerParts& L) {
    const long n = long(L.n);
    CMatrix C(4 * n, 4 * n);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) C.block<4, 4>(4 * i, 4 * j) = cauchy_block(L, i, j);
    return C;
}

inline BoundaryOperator assemble_single_layer(const SurfaceMesh& mesh, const SpectralParameter& p) {
    const LayerParts L = assemble_layers(mesh, p);
    const long n = long(L.n);
    BoundaryOperator op{CMatrix::Zero(4 * n, 4 * n), mesh.id, p, OperatorKind::single_layer, std::nullopt};
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j)
            for (int a = 0; a < 4; ++a) op.matrix(4 * i + a, 4 * j + a) = L.S(i, j);
    return op;
}

inline BoundaryOperator assemble_cauchy(const LayerParts& L) {
    return {cauchy_matrix(L), L.mesh_id, L.p, OperatorKind::cauchy, std::nullopt};
}

inline BoundaryOperator assemble_cauchy(const SurfaceMesh& mesh, const SpectralParameter& p) {
    return assemble_cauchy(assemble_layers(mesh, p));
}

inline CMatrix lambda_matrix(const SurfaceMesh& mesh, const LayerParts& L, const Coupling& c, Branch b) {
    validate(c);
    const long n = long(L.n);
    const double sg = b == Branch::plus ? 1.0 : -1.0;
    CMatrix A = cauchy_matrix(L);
    if (sg < 0) A = -A;
    if (auto* pr = std::get_if<Projected>(&c)) {
        const Mat4 P = mit_projector(pr->sign);
#pragma omp parallel for schedule(static)
        for (long i = 0; i < n; ++i)
            for (long j = 0; j < n; ++j) A.block<4, 4>(4 * i, 4 * j) = P * A.block<4, 4>(4 * i, 4 * j) * P;
    }
    for (long i = 0; i < n; ++i) A.block<4, 4>(4 * i, 4 * i) += multiplication_block(c, mesh.normals[std::size_t(i)], b);
    return A;
}

inline BoundaryOperator assemble_lambda(const SurfaceMesh& mesh, const LayerParts& L, const Coupling& c, Branch b) {
    return {lambda_matrix(mesh, L, c, b), mesh.id, L.p,
            b == Branch::plus ? OperatorKind::lambda_plus : OperatorKind::lambda_minus, c};
}

inline BoundaryOperator assemble_lambda(const SurfaceMesh& mesh, const SpectralParameter& p, const Coupling& c,
                                        Branch b) {
    validate(c);
    return assemble_lambda(mesh, assemble_layers(mesh, p), c, b);
}

// Matrix-free Lambda_+- x.
inline CVector apply_lambda(const SurfaceMesh& mesh, const LayerParts& L, const Coupling& c, Branch b,
                            const CVector& x) {
    const double sg = b == Branch::plus ? 1.0 : -1.0;
    auto mult = [&](std::size_t i) { return multiplication_block(c, mesh.normals[i], b); };
    if (auto* pr = std::get_if<Projected>(&c)) {
        const Mat4 P = mit_projector(pr->sign);
        auto proj = [&](std::size_t) { return P; };
        CVector Px = apply_nodewise(L.n, x, proj);
        return apply_nodewise(L.n, x, mult) + sg * apply_nodewise(L.n, apply_cauchy(L, Px), proj);
    }
    return apply_nodewise(L.n, x, mult) + sg * apply_cauchy(L, x);
}

// Components kept by P_+ (0,1) or P_- (2,3) for each node.
inline std::vector<long> projected_indices(std::size_t n, int sign) {
    std::vector<long> idx;
    idx.reserve(2 * n);
    const long off = sign > 0 ? 0 : 2;
    for (long i = 0; i < long(n); ++i) {
        idx.push_back(4 * i + off);
        idx.push_back(4 * i + off + 1);
    }
    return idx;
}

inline CMatrix compress(const CMatrix& A, const std::vector<long>& idx) {
    const long m = long(idx.size());
    CMatrix B(m, m);
    for (long i = 0; i < m; ++i)
        for (long j = 0; j < m; ++j) B(i, j) = A(idx[std::size_t(i)], idx[std::size_t(j)]);
    return B;
}

// ||A - A^H||_F / ||A||_F
inline double hermiticity_defect(const CMatrix& A) {
    const double nrm = A.norm();
    return nrm == 0.0 ? 0.0 : (A - A.adjoint()).norm() / nrm;
}

// Same quantity for C (and Lambda = blockdiag(M_i) +- C) without forming the dense matrix.
inline double hermiticity_defect(const SurfaceMesh& mesh, const LayerParts& L,
                                 const std::optional<Coupling>& c = std::nullopt, Branch b = Branch::plus) {
    const long n = long(L.n);
    double num = 0.0, den = 0.0;
    const double sg = b == Branch::plus ? 1.0 : -1.0;
    std::optional<Mat4> P;
    if (c)
        if (auto* pr = std::get_if<Projected>(&*c)) P = mit_projector(pr->sign);
    auto block = [&](long i, long j) {
        Mat4 B = sg * cauchy_block(L, i, j);
        if (P) B = *P * B * *P;
        if (c && i == j) B += multiplication_block(*c, mesh.normals[std::size_t(i)], b);
        return B;
    };
    for (long i = 0; i < n; ++i)
        for (long j = i; j < n; ++j) {
            const Mat4 Bij = block(i, j);
            const Mat4 Bji = block(j, i);
            const double f = i == j ? 1.0 : 2.0;
            num += f * (Bij - Bji.adjoint()).squaredNorm();
            den += Bij.squaredNorm() + (i == j ? 0.0 : Bji.squaredNorm());
        }
    return den == 0.0 ? 0.0 : std::sqrt(num / den);
}

// ---------------------------------------------------------------------------
// Off-surface evaluation

inline double weighted_norm(const SurfaceMesh& mesh, const CVector& g) {
    double s = 0.0;
    for (std::size_t i = 0; i < mesh.size(); ++i) s += mesh.weights[i] * g.segment<4>(long(4 * i)).squaredNorm();
    return std::sqrt(s);
}

inline double distance_to_nodes(const SurfaceMesh& mesh, const Vec3& x) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& y : mesh.nodes) best = std::min(best, (x - y).squaredNorm());
    return std::sqrt(best);
}

// Plain node quadrature of Phi^z[g](x); no distance check.
inline Vec4 field_quadrature(const SurfaceMesh& mesh, const CVector& g, const SpectralParameter& p, const Vec3& x) {
    const cplx k = sqrt_branch(p);
    Vec4 out = Vec4::Zero();
    for (std::size_t j = 0; j < mesh.size(); ++j)
        out += mesh.weights[j] * (detail::phi_k(p.z, p.m, k, Vec3(x - mesh.nodes[j])) * g.segment<4>(long(4 * j)));
    return out;
}

inline Vec4 evaluate_field(const SurfaceMesh& mesh, const CVector& g, const SpectralParameter& p, const Vec3& x) {
    if (g.size() != long(4 * mesh.size())) fail(ErrorKind::invalid_argument, "density length does not match mesh");
    require_admissible(p);
    if (distance_to_nodes(mesh, x) <= 0.5 * mesh.h)
        fail(ErrorKind::too_close, "evaluation point within h/2 of the surface; use NearFieldEvaluator");
    return field_quadrature(mesh, g, p, x);
}

inline std::pair<Vec3, Vec3> tangent_frame(const Vec3& n) {
    const Vec3 a = std::abs(n[0]) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
    Vec3 e1 = (a - a.dot(n) * n).normalized();
    Vec3 e2 = n.cross(e1);
    return {e1, e2};
}

struct NearFieldOptions {
    double patch_factor = 6.0;  // patch radius in units of the mesh spacing
    int gauss_points = 12;      // per radial panel
    int theta_points = 48;
    int fit_neighbours = 18;
};

// Phi^z[g] close to the surface: the node sum is used away from a foot node and a
// fine polar quadrature of a local quadratic reconstruction of g near it, blended by
// a smooth partition of unity.
class NearFieldEvaluator {
public:
    NearFieldEvaluator(const SurfaceMesh& mesh, const CVector& g, const SpectralParameter& p,
                       NearFieldOptions opt = {})
        : mesh_(mesh), g_(g), p_(p), opt_(opt), index_(mesh) {
        if (g.size() != long(4 * mesh.size())) fail(ErrorKind::invalid_argument, "density length does not match mesh");
        k_ = sqrt_branch(p);
        rho_ = opt.patch_factor * mesh.spacing;
        if (mesh.kind == SurfaceKind::sphere) rho_ = std::min(rho_, mesh.radius);
        build_fits();
        auto [x, w] = gauss_legendre(opt.gauss_points);
        gx_ = x;
        gw_ = w;
    }

    double patch_radius() const { return rho_; }

    // Local reconstruction of the density at a surface point y.
    Vec4 density(const Vec3& y) const {
        const std::size_t q = index_.nearest(y);
        const auto& [e1, e2] = frames_[q];
        const Vec3 d = y - mesh_.nodes[q];
        const double s1 = d.dot(e1) / mesh_.spacing, s2 = d.dot(e2) / mesh_.spacing;
        const double mono[5] = {s1, s2, s1 * s1, s1 * s2, s2 * s2};
        Vec4 v = g_.segment<4>(long(4 * q));
        for (int c = 0; c < 5; ++c) v += mono[c] * coef_[q].row(c).transpose();
        return v;
    }

    // Phi^z[g](x_i - s N_i) for each signed offset s; s > 0 lies in Omega_+.
    std::vector<Vec4> along_normal(std::size_t i, const std::vector<double>& offsets) const {
        double tmin = std::numeric_limits<double>::infinity();
        for (double s : offsets) tmin = std::min(tmin, std::abs(s));
        const auto patch = build_patch(i, tmin);
        const Vec3& p = mesh_.nodes[i];
        const Vec3& N = mesh_.normals[i];
        std::vector<Vec4> out;
        for (double s : offsets) {
            const Vec3 x = p - s * N;
            Vec4 v = Vec4::Zero();
            for (std::size_t j = 0; j < mesh_.size(); ++j) {
                const double u = (mesh_.nodes[j] - p).norm() / rho_;
                const double wfar = 1.0 - partition_bump(u);
                if (wfar == 0.0) continue;
                v += (mesh_.weights[j] * wfar) *
                     (detail::phi_k(p_.z, p_.m, k_, Vec3(x - mesh_.nodes[j])) * g_.segment<4>(long(4 * j)));
            }
            for (const auto& pt : patch) v += pt.w * (detail::phi_k(p_.z, p_.m, k_, Vec3(x - pt.y)) * pt.g);
            out.push_back(v);
        }
        return out;
    }

    // (C_+ g, C_- g) at node i by extrapolating t -> 0 from t, t/2, t/4 on each side.
    std::pair<Vec4, Vec4> one_sided_limits(std::size_t i, double t = 0.0) const {
        if (t <= 0.0) t = mesh_.spacing;
        const auto f = along_normal(i, {t, t / 2, t / 4, -t, -t / 2, -t / 4});
        auto extrap = [](const Vec4& a, const Vec4& b, const Vec4& c) -> Vec4 {
            return (8.0 * c - 6.0 * b + a) / 3.0;
        };
        return {extrap(f[0], f[1], f[2]), extrap(f[3], f[4], f[5])};
    }

private:
    struct PatchPoint {
        Vec3 y;
        double w;
        Vec4 g;
    };

    void build_fits() {
        const auto n = mesh_.size();
        frames_.resize(n);
        coef_.resize(n);
        const auto kfit = std::min<std::size_t>(std::size_t(opt_.fit_neighbours) + 1, n);
        for (std::size_t q = 0; q < n; ++q) {
            frames_[q] = tangent_frame(mesh_.normals[q]);
            const auto& [e1, e2] = frames_[q];
            auto nb = index_.nearest(mesh_.nodes[q], kfit);
            Eigen::MatrixXd A(long(nb.size()) - 1, 5);
            Eigen::MatrixXcd B(long(nb.size()) - 1, 4);
            long r = 0;
            for (std::size_t j : nb) {
                if (j == q) continue;
                if (r >= A.rows()) break;
                const Vec3 d = mesh_.nodes[j] - mesh_.nodes[q];
                const double s1 = d.dot(e1) / mesh_.spacing, s2 = d.dot(e2) / mesh_.spacing;
                A.row(r) << s1, s2, s1 * s1, s1 * s2, s2 * s2;
                B.row(r) = (g_.segment<4>(long(4 * j)) - g_.segment<4>(long(4 * q))).transpose();
                ++r;
            }
            A.conservativeResize(r, 5);
            B.conservativeResize(r, 4);
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
            Eigen::Matrix<cplx, 5, 4> c;
            c.real() = qr.solve(Eigen::MatrixXd(B.real()));
            c.imag() = qr.solve(Eigen::MatrixXd(B.imag()));
            coef_[q] = c;
        }
    }

    std::vector<double> breakpoints(double tmin, double rmax) const {
        std::vector<double> b{0.0};
        double r = tmin / 4.0;
        while (r < rmax) {
            b.push_back(r);
            r *= 2.0;
        }
        b.push_back(rmax);
        return b;
    }

    std::vector<PatchPoint> build_patch(std::size_t i, double tmin) const {
        const Vec3& p = mesh_.nodes[i];
        const Vec3& N = mesh_.normals[i];
        std::vector<PatchPoint> pts;
        const int nt = opt_.theta_points;
        const double dth = 2.0 * std::numbers::pi / nt;
        if (mesh_.kind == SurfaceKind::sphere) {
            const double R = mesh_.radius;
            const double rmax = rho_ >= 2.0 * R ? std::numbers::pi * R : 2.0 * R * std::asin(rho_ / (2.0 * R));
            const Vec3 c = p - R * N;  // sphere centre
            const auto [e1, e2] = tangent_frame(N);
            const auto br = breakpoints(tmin, rmax);
            for (std::size_t b = 0; b + 1 < br.size(); ++b) {
                const double lo = br[b], hi = br[b + 1];
                for (std::size_t gq = 0; gq < gx_.size(); ++gq) {
                    const double rho = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gx_[gq];
                    const double wr = 0.5 * (hi - lo) * gw_[gq] * R * std::sin(rho / R) * dth;
                    for (int t = 0; t < nt; ++t) {
                        const double th = t * dth;
                        const Vec3 u = std::cos(th) * e1 + std::sin(th) * e2;
                        const Vec3 y = c + R * (std::cos(rho / R) * N + std::sin(rho / R) * u);
                        const double chi = partition_bump((y - p).norm() / rho_);
                        if (chi == 0.0) continue;
                        pts.push_back({y, wr * chi, density(y)});
                    }
                }
            }
        } else {
            const Vec2 pb(p[0], p[1]);
            const auto br = breakpoints(tmin, rho_);
            for (std::size_t b = 0; b + 1 < br.size(); ++b) {
                const double lo = br[b], hi = br[b + 1];
                for (std::size_t gq = 0; gq < gx_.size(); ++gq) {
                    const double rho = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gx_[gq];
                    const double wr = 0.5 * (hi - lo) * gw_[gq] * rho * dth;
                    for (int t = 0; t < nt; ++t) {
                        const double th = t * dth;
                        const Vec2 yb = pb + rho * Vec2(std::cos(th), std::sin(th));
                        if (yb.norm() >= mesh_.r_trunc) continue;
                        const Vec2 grad = mesh_.nu * mesh_.bump.gradient(yb);
                        const Vec3 y(yb[0], yb[1], mesh_.nu * mesh_.bump.value(yb));
                        const double chi = partition_bump((y - p).norm() / rho_);
                        if (chi == 0.0) continue;
                        pts.push_back({y, wr * std::sqrt(1.0 + grad.squaredNorm()) * chi, density(y)});
                    }
                }
            }
        }
        return pts;
    }

    const SurfaceMesh& mesh_;
    CVector g_;
    SpectralParameter p_;
    NearFieldOptions opt_;
    NodeIndex index_;
    cplx k_;
    double rho_ = 0.0;
    std::vector<std::pair<Vec3, Vec3>> frames_;
    std::vector<Eigen::Matrix<cplx, 5, 4>> coef_;
    std::vector<double> gx_, gw_;
};

// ---------------------------------------------------------------------------
// Tolerances and identity residuals

// tol(mesh) = c h, with c fixed so that the 512-node unit sphere gets 0.05.
inline double mesh_tolerance(const SurfaceMesh& mesh) {
    static const double c = 0.05 / make_sphere(1.0, 512).h;
    return c * mesh.h;
}

// Products of low-order monomials with fixed random spinors (seeded).
inline std::vector<CVector> smooth_test_densities(const SurfaceMesh& mesh, unsigned seed = 7) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<CVector> out;
    const auto n = mesh.size();
    for (int f = 0; f < 5; ++f) {
        Vec4 v;
        for (int c = 0; c < 4; ++c) v[c] = cplx(nd(rng), nd(rng));
        CVector g(long(4 * n));
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3& x = mesh.nodes[i];
            double s = 1.0;
            switch (f) {
            case 0: s = 1.0; break;
            case 1: s = x[0]; break;
            case 2: s = x[1] * x[2]; break;
            case 3: s = x[2] * x[2] - x[0]; break;
            default: s = x[0] * x[1] * x[2]; break;
            }
            g.segment<4>(long(4 * i)) = s * v;
        }
        out.push_back(g);
    }
    return out;
}

// max over the smooth family of ||((C alpha.N)^2 + 1/4) g|| / ||g||
inline double squared_identity_residual(const SurfaceMesh& mesh, const LayerParts& L) {
    auto aN = [&](std::size_t i) { return alpha_dot(mesh.normals[i]); };
    double res = 0.0;
    for (const auto& g : smooth_test_densities(mesh)) {
        auto M = [&](const CVector& v) { return apply_cauchy(L, apply_nodewise(L.n, v, aN)); };
        const CVector r = M(M(g)) + 0.25 * g;
        res = std::max(res, weighted_norm(mesh, r) / weighted_norm(mesh, g));
    }
    return res;
}

struct IdentityReport {
    double mesh_tol = 0.0;
    double psi_relation = 0.0;        // (m - a beta){beta,C}/(2(m^2-a^2)) - S
    double gamma5_relation = 0.0;     // [gamma5, C] - 2 m gamma5 beta S
    double squared_identity = 0.0;    // ((C alpha.N)^2 + 1/4) on smooth densities
    std::optional<double> product_expansion;  // Lambda_-+ Lambda_+- first-line expansion
    double hermiticity_cauchy = 0.0;
    std::optional<double> hermiticity_lambda_plus, hermiticity_lambda_minus;
    int probes = 0;
};

inline std::vector<CVector> probe_vectors(std::size_t n, int count, unsigned seed = 11) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<CVector> out;
    for (int c = 0; c < count; ++c) {
        CVector v(long(4 * n));
        for (long i = 0; i < v.size(); ++i) v[i] = cplx(nd(rng), nd(rng));
        out.push_back(v);
    }
    return out;
}

// Residuals are relative and measured on random probe vectors, so nothing larger
// than the n x n layer parts is formed.
inline IdentityReport operator_identities(const SurfaceMesh& mesh, double a, double m,
                                          const std::optional<Coupling>& c = std::nullopt, int probes = 4) {
    if (!(std::abs(a) < m)) fail(ErrorKind::inadmissible_energy, "operator_identities needs a in (-m, m)");
    if (c) validate(*c);
    const SpectralParameter p{cplx(a, 0.0), m};
    const LayerParts L = assemble_layers(mesh, p);
    const auto n = L.n;
    IdentityReport rep;
    rep.mesh_tol = mesh_tolerance(mesh);
    rep.probes = probes;
    auto B = [](std::size_t) { return beta(); };
    auto G5 = [](std::size_t) { return gamma5(); };
    auto aN = [&](std::size_t i) { return alpha_dot(mesh.normals[i]); };
    auto rel = [](const CVector& r, const CVector& ref) { return r.norm() / std::max(ref.norm(), 1e-300); };
    for (const auto& v : probe_vectors(n, probes)) {
        const CVector Sv = apply_single_layer(L, v);
        // (i)
        CVector ac = apply_nodewise(n, apply_cauchy(L, v), B) + apply_cauchy(L, apply_nodewise(n, v, B));
        const Mat4 pre = (m * id4() - a * beta()) / (2.0 * (m * m - a * a));
        CVector lhs = apply_nodewise(n, ac, [&](std::size_t) { return pre; });
        rep.psi_relation = std::max(rep.psi_relation, rel(lhs - Sv, Sv));
        // (ii)
        CVector cg = apply_nodewise(n, apply_cauchy(L, v), G5) - apply_cauchy(L, apply_nodewise(n, v, G5));
        CVector rhs = 2.0 * m * apply_nodewise(n, Sv, [](std::size_t) { return Mat4(gamma5() * beta()); });
        rep.gamma5_relation = std::max(rep.gamma5_relation, rel(cg - rhs, rhs));
        // (iii)/(iv): exact algebraic expansion of Lambda_- Lambda_+ and Lambda_+ Lambda_-
        if (c && !std::holds_alternative<Projected>(*c)) {
            const CVector Cv = apply_cauchy(L, v);
            const CVector CCv = apply_cauchy(L, Cv);
            CVector expansion;
            double qinv = 0.0;
            CVector mixed;  // {B, C} for electro-scalar, [A, C] for anomalous magnetic
            if (auto* e = std::get_if<ElectroScalar>(&*c)) {
                const double s = sgn_kappa(*e);
                qinv = 1.0 / s;
                auto Bk = [&](std::size_t i) { return Mat4(e->mu * beta() + e->eta * aN(i)); };
                mixed = apply_nodewise(n, Cv, Bk) + apply_cauchy(L, apply_nodewise(n, v, Bk));
                expansion = qinv * v + qinv * mixed - CCv;
                for (Branch b1 : {Branch::minus, Branch::plus}) {
                    const Branch b2 = b1 == Branch::minus ? Branch::plus : Branch::minus;
                    const CVector prod = apply_lambda(mesh, L, *c, b1, apply_lambda(mesh, L, *c, b2, v));
                    rep.product_expansion = std::max(rep.product_expansion.value_or(0.0), rel(prod - expansion, prod));
                }
            } else {
                const auto& am = std::get<AnomalousMagnetic>(*c);
                const double q = am.zeta * am.zeta + am.upsilon * am.upsilon;
                auto Ak = [&](std::size_t i) { return Mat4(am.zeta * gamma5() + I_unit * am.upsilon * beta() * aN(i)); };
                mixed = apply_nodewise(n, Cv, Ak) - apply_cauchy(L, apply_nodewise(n, v, Ak));
                for (double sg : {1.0, -1.0}) {
                    // Lambda_-+ Lambda_+- = 1/q - C^2 +- [A, C]/q
                    const Branch b1 = sg > 0 ? Branch::minus : Branch::plus;
                    const Branch b2 = sg > 0 ? Branch::plus : Branch::minus;
                    expansion = v / q - CCv + sg * mixed / q;
                    const CVector prod = apply_lambda(mesh, L, *c, b1, apply_lambda(mesh, L, *c, b2, v));
                    rep.product_expansion = std::max(rep.product_expansion.value_or(0.0), rel(prod - expansion, prod));
                }
            }
        }
    }
    rep.squared_identity = squared_identity_residual(mesh, L);
    rep.hermiticity_cauchy = hermiticity_defect(mesh, L);
    if (c) {
        rep.hermiticity_lambda_plus = hermiticity_defect(mesh, L, c, Branch::plus);
        rep.hermiticity_lambda_minus = hermiticity_defect(mesh, L, c, Branch::minus);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Export: row-major, each entry written as (re, im).

inline void write_binary(const BoundaryOperator& op, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorKind::io, "cannot open " + path);
    for (long i = 0; i < op.matrix.rows(); ++i)
        for (long j = 0; j < op.matrix.cols(); ++j) {
            const double re = op.matrix(i, j).real(), im = op.matrix(i, j).imag();
            os.write(reinterpret_cast<const char*>(&re), sizeof re);
            os.write(reinterpret_cast<const char*>(&im), sizeof im);
        }
}

inline void write_csv(const BoundaryOperator& op, std::ostream& os) {
    char buf[64];
    for (long i = 0; i < op.matrix.rows(); ++i) {
        for (long j = 0; j < op.matrix.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%s%.17g,%.17g", j ? "," : "", op.matrix(i, j).real(), op.matrix(i, j).imag());
            os << buf;
        }
        os << '\n';
    }
}

} // namespace dshell
