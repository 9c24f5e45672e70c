#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dshell/boundary_ops.hpp"

namespace dshell {

// ---------------------------------------------------------------------------
// Discrete Lambda_+ for real a, reduced to the range of the projector when the
// coupling is of projected type.

struct GapOperator {
    CMatrix matrix;             // possibly compressed
    std::vector<long> indices;  // kept components; empty = all
    std::size_t n = 0;

    CVector expand(const CVector& v) const {
        if (indices.empty()) return v;
        CVector out = CVector::Zero(long(4 * n));
        for (std::size_t i = 0; i < indices.size(); ++i) out[indices[i]] = v[long(i)];
        return out;
    }
    CVector restrict(const CVector& v) const {
        if (indices.empty()) return v;
        CVector out(long(indices.size()));
        for (std::size_t i = 0; i < indices.size(); ++i) out[long(i)] = v[indices[i]];
        return out;
    }
};

inline GapOperator gap_operator(const SurfaceMesh& mesh, const SpectralParameter& p, const Coupling& c,
                                Branch b = Branch::plus) {
    GapOperator op;
    op.n = mesh.size();
    op.matrix = lambda_matrix(mesh, assemble_layers(mesh, p), c, b);
    if (auto* pr = std::get_if<Projected>(&c)) {
        op.indices = projected_indices(op.n, pr->sign);
        op.matrix = compress(op.matrix, op.indices);
    }
    return op;
}

struct SmallestMode {
    double sigma = 0.0;
    CVector vector;
};

// Smallest singular value (and its right vector). Real a on an equal-weight mesh gives a
// Hermitian matrix, handled by the symmetric eigensolver; otherwise an SVD is used.
inline SmallestMode smallest_mode(const CMatrix& A, bool hermitian, bool want_vector) {
    SmallestMode out;
    if (hermitian) {
        const CMatrix H = 0.5 * (A + A.adjoint());
        Eigen::SelfAdjointEigenSolver<CMatrix> es(H, want_vector ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success) fail(ErrorKind::not_converged, "eigensolver failed");
        Eigen::Index k = 0;
        es.eigenvalues().cwiseAbs().minCoeff(&k);
        out.sigma = std::abs(es.eigenvalues()[k]);
        if (want_vector) out.vector = es.eigenvectors().col(k);
        return out;
    }
    Eigen::BDCSVD<CMatrix> svd(A, want_vector ? Eigen::ComputeThinV : 0);
    const auto& s = svd.singularValues();
    out.sigma = s[s.size() - 1];
    if (want_vector) out.vector = svd.matrixV().col(s.size() - 1);
    return out;
}

inline SmallestMode sigma_min(const SurfaceMesh& mesh, double a, double m, const Coupling& c,
                              bool want_vector = false) {
    const SpectralParameter p{cplx(a, 0.0), m};
    const GapOperator op = gap_operator(mesh, p, c);
    SmallestMode md = smallest_mode(op.matrix, mesh.equal_weights(), want_vector);
    if (want_vector) md.vector = op.expand(md.vector);
    return md;
}

// ---------------------------------------------------------------------------
// Birman-Schwinger scan

struct Candidate {
    double a = 0.0;
    double sigma = 0.0;
    bool refined = false;
    std::size_t grid_index = 0;  // seed point
};

struct ScanReport {
    std::vector<double> a_grid;
    std::vector<double> sigma_min;
    std::vector<bool> flagged;  // a = +-m mu/eps for electro-scalar couplings
    std::vector<Candidate> candidates;
    double mesh_tol = 0.0;
    std::string mesh_id;
    std::string coupling;
};

struct ScanOptions {
    double threshold_factor = 10.0;  // candidates need sigma < factor * mesh_tol
    double refine_width = 1e-8;      // golden-section bracket width, in units of m
    bool refine = true;
    std::optional<double> mesh_tol;  // override of the calibrated c h
};

// Midpoints of `count` equal cells of [lo, hi] (default: the whole gap).
inline std::vector<double> uniform_gap_grid(double m, int count, std::optional<double> lo = std::nullopt,
                                            std::optional<double> hi = std::nullopt) {
    if (count < 1) fail(ErrorKind::invalid_grid, "gap grid needs at least one point");
    const double l = lo.value_or(-m), h = hi.value_or(m);
    if (!(l < h) || l < -m || h > m) fail(ErrorKind::invalid_grid, "grid bounds must satisfy -m <= lo < hi <= m");
    std::vector<double> g;
    const double d = (h - l) / count;
    for (int i = 0; i < count; ++i) g.push_back(l + (i + 0.5) * d);
    return g;
}

inline std::vector<double> special_energies(double m, const Coupling& c) {
    if (auto* e = std::get_if<ElectroScalar>(&c))
        if (e->eps != 0.0) return {-m * e->mu / e->eps, m * e->mu / e->eps};
    return {};
}

inline ScanReport birman_schwinger_scan(const SurfaceMesh& mesh, double m, const Coupling& c,
                                        const std::vector<double>& grid, const ScanOptions& opt = {}) {
    validate(c);
    if (grid.empty()) fail(ErrorKind::invalid_grid, "empty gap grid");
    for (double a : grid)
        if (!(std::abs(a) < m)) fail(ErrorKind::invalid_grid, "grid point outside (-m, m)");
    if (!std::is_sorted(grid.begin(), grid.end())) fail(ErrorKind::invalid_grid, "gap grid must be increasing");
    ScanReport rep;
    rep.a_grid = grid;
    rep.mesh_tol = opt.mesh_tol.value_or(mesh_tolerance(mesh));
    rep.mesh_id = mesh.id;
    rep.coupling = describe(c);
    const auto special = special_energies(m, c);
    for (double a : grid) {
        rep.sigma_min.push_back(sigma_min(mesh, a, m, c).sigma);
        rep.flagged.push_back(std::any_of(special.begin(), special.end(),
                                          [&](double s) { return std::abs(a - s) <= 1e-9 * m; }));
    }
    const double thr = opt.threshold_factor * rep.mesh_tol;
    auto sig = [&](double a) { return sigma_min(mesh, a, m, c).sigma; };
    const std::size_t N = grid.size();
    // interior local minima only: sigma near the gap ends is pulled down by the continuum
    for (std::size_t i = 1; i + 1 < N; ++i) {
        if (rep.flagged[i]) continue;
        const double s = rep.sigma_min[i];
        if (!(s <= rep.sigma_min[i - 1] && s < rep.sigma_min[i + 1]) || !(s < thr)) continue;
        Candidate cd{grid[i], s, false, i};
        if (opt.refine) {
            // golden section on [a_{i-1}, a_{i+1}]
            const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
            double lo = grid[i - 1], hi = grid[i + 1];
            double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
            double f1 = sig(x1), f2 = sig(x2);
            while (hi - lo > opt.refine_width * m) {
                if (f1 < f2) {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - gr * (hi - lo);
                    f1 = sig(x1);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + gr * (hi - lo);
                    f2 = sig(x2);
                }
            }
            cd.a = 0.5 * (lo + hi);
            cd.sigma = sig(cd.a);
            cd.refined = true;
        }
        rep.candidates.push_back(cd);
    }
    return rep;
}

inline void write_scan_csv(const ScanReport& r, std::ostream& os) {
    char buf[128];
    os << "a,sigma_min,candidate_flag\n";
    for (std::size_t i = 0; i < r.a_grid.size(); ++i) {
        // 0 = none, 1 = candidate seed, 2 = special point +-m mu/eps
        int flag = r.flagged[i] ? 2 : 0;
        for (auto& c : r.candidates)
            if (c.grid_index == i) flag = 1;
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d\n", r.a_grid[i], r.sigma_min[i], flag);
        os << buf;
    }
}

// ---------------------------------------------------------------------------
// Eigenfunctions

struct KernelEigenfunction {
    double a = 0.0;
    double sigma = 0.0;
    CVector density;  // node-major, unit Euclidean norm
    std::function<Vec4(const Vec3&)> field;
};

inline KernelEigenfunction eigenfunction_from_kernel(const SurfaceMesh& mesh, double a, double m, const Coupling& c,
                                                     double threshold_factor = 10.0) {
    validate(c);
    const SmallestMode md = sigma_min(mesh, a, m, c, true);
    if (!(md.sigma < threshold_factor * mesh_tolerance(mesh)))
        fail(ErrorKind::not_converged, "sigma_min is above the eigenvalue threshold at this a");
    KernelEigenfunction ef;
    ef.a = a;
    ef.sigma = md.sigma;
    ef.density = md.vector;
    const SpectralParameter p{cplx(a, 0.0), m};
    ef.field = [mesh_ptr = &mesh, g = md.vector, p](const Vec3& x) { return evaluate_field(*mesh_ptr, g, p, x); };
    return ef;
}

// ---------------------------------------------------------------------------
// Krein resolvent

struct ResolventSample {
    SpectralParameter z;
    Vec3 source_point;
    Vec3 eval_point;
    Vec4 value;
};

// Factorizes Lambda^z_+ once; applies (H_kappa - z)^{-1} to point sources
// delta_{src} e, e a fixed spinor polarization.
class KreinSolver {
public:
    KreinSolver(const SurfaceMesh& mesh, const SpectralParameter& p, const Coupling& c)
        : mesh_(mesh), p_(p), c_(c) {
        validate(c);
        require_admissible(p);
        if (p.z.imag() == 0.0) fail(ErrorKind::inadmissible_energy, "Krein resolvent needs Im z != 0");
        op_ = gap_operator(mesh, p, c);
        lu_.compute(op_.matrix);
        const double rc = lu_.rcond();
        if (!(rc > 1e-14)) fail(ErrorKind::singular, "discrete Lambda^z_+ is numerically singular");
    }

    struct Source {
        Vec3 point;
        CVector density;  // (Lambda^z_+)^{-1} applied to the free trace
        Vec4 polarization;
    };

    Source solve(const Vec3& src, const Vec4& e = Vec4::Unit(0)) const {
        if (distance_to_nodes(mesh_, src) <= 0.5 * mesh_.h) fail(ErrorKind::too_close, "source point too close to the surface");
        const cplx k = sqrt_branch(p_);
        CVector b(long(4 * mesh_.size()));
        for (std::size_t i = 0; i < mesh_.size(); ++i)
            b.segment<4>(long(4 * i)) = detail::phi_k(p_.z, p_.m, k, Vec3(mesh_.nodes[i] - src)) * e;
        CVector g = op_.expand(lu_.solve(op_.restrict(b)));
        return {src, g, e};
    }

    Vec4 free_field(const Source& s, const Vec3& x) const { return phi_z(p_, Vec3(x - s.point)) * s.polarization; }

    Vec4 correction(const Source& s, const Vec3& x) const { return evaluate_field(mesh_, s.density, p_, x); }

    Vec4 apply(const Source& s, const Vec3& x) const { return free_field(s, x) - correction(s, x); }

    const SpectralParameter& parameter() const { return p_; }

private:
    const SurfaceMesh& mesh_;
    SpectralParameter p_;
    Coupling c_;
    GapOperator op_;
    Eigen::PartialPivLU<CMatrix> lu_;
};

// Columns: (H_kappa - z)^{-1} applied to delta_src e_j, evaluated at x.
inline Mat4 resolvent_matrix(const KreinSolver& ks, const Vec3& src, const Vec3& x) {
    Mat4 G;
    for (int j = 0; j < 4; ++j) G.col(j) = ks.apply(ks.solve(src, Vec4::Unit(j)), x);
    return G;
}

inline ResolventSample krein_apply(const SurfaceMesh& mesh, cplx z, double m, const Coupling& c, const Vec3& source,
                                   const Vec3& eval, const Vec4& polarization = Vec4::Unit(0)) {
    const SpectralParameter p{z, m};
    KreinSolver ks(mesh, p, c);
    const auto s = ks.solve(source, polarization);
    return {p, source, eval, ks.apply(s, eval)};
}

// ---------------------------------------------------------------------------
// Confinement

inline bool on_confinement_locus(const Coupling& c, double tol = 1e-12) {
    if (auto* e = std::get_if<ElectroScalar>(&c))
        return e->eta == 0.0 && std::abs(e->eps * e->eps - e->mu * e->mu + 4.0) <= tol * std::max(1.0, e->mu * e->mu);
    if (auto* a = std::get_if<AnomalousMagnetic>(&c)) return a->zeta == 0.0 && std::abs(std::abs(a->upsilon) - 2.0) <= tol;
    return false;
}

struct LeakageReport {
    double ratio = 0.0;
    double max_field = 0.0;
    double max_free = 0.0;
    int probes = 0;
    std::vector<Vec3> probe_points;
    std::vector<double> field_norm, free_norm;
};

inline std::vector<Vec3> fibonacci_directions(int n) {
    std::vector<Vec3> out;
    const double golden = std::numbers::pi * (1.0 + std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        const double t = i + 0.5, z = 1.0 - 2.0 * t / n, r = std::sqrt(1.0 - z * z);
        out.emplace_back(r * std::cos(golden * t), r * std::sin(golden * t), z);
    }
    return out;
}

// Exterior field of a point source in Omega_+ (sphere interior), relative to the free
// field at the same probes. No locus check: also used for control couplings.
inline LeakageReport leakage_ratio(const SurfaceMesh& mesh, double m, const Coupling& c, cplx z,
                                   int probes = 40, double probe_radius = 1.6) {
    if (mesh.kind != SurfaceKind::sphere) fail(ErrorKind::unsupported, "leakage needs a closed surface (sphere)");
    const double R = mesh.radius;
    const KreinSolver ks(mesh, SpectralParameter{z, m}, c);
    const auto src = ks.solve(Vec3(0.1, -0.2, 0.15) * R);
    LeakageReport rep;
    rep.probes = probes;
    for (const auto& d : fibonacci_directions(probes)) {
        const Vec3 x = probe_radius * R * d;
        rep.probe_points.push_back(x);
        rep.field_norm.push_back(ks.apply(src, x).norm());
        rep.free_norm.push_back(ks.free_field(src, x).norm());
        rep.max_field = std::max(rep.max_field, rep.field_norm.back());
        rep.max_free = std::max(rep.max_free, rep.free_norm.back());
    }
    rep.ratio = rep.max_field / rep.max_free;
    return rep;
}

inline LeakageReport confinement_leakage(const SurfaceMesh& mesh, double m, const Coupling& c, cplx z) {
    validate(c);
    if (!on_confinement_locus(c))
        fail(ErrorKind::invalid_coupling, "coupling is not on the confinement locus");
    return leakage_ratio(mesh, m, c, z);
}

// ---------------------------------------------------------------------------
// Transmission conditions

struct TransmissionReport {
    double residual = 0.0;  // ||combination|| / (||t phi_+|| + ||t phi_-||)
    std::optional<double> zigzag_plus, zigzag_minus;  // ||P_{-,v} t phi_+||, ||P_{+,v} t phi_-|| (relative)
};

inline TransmissionReport transmission_residual(const SurfaceMesh& mesh, const CVector& phi_plus,
                                                const CVector& phi_minus, const Coupling& c) {
    const long len = long(4 * mesh.size());
    if (phi_plus.size() != len || phi_minus.size() != len)
        fail(ErrorKind::invalid_argument, "trace length does not match mesh");
    validate(c);
    CVector r(len);
    for (std::size_t i = 0; i < mesh.size(); ++i) {
        const Mat4 aN = alpha_dot(mesh.normals[i]);
        const Vec4 p = phi_plus.segment<4>(long(4 * i)), q = phi_minus.segment<4>(long(4 * i));
        Vec4 v;
        if (auto* e = std::get_if<ElectroScalar>(&c)) {
            v = 0.5 * (e->eps * id4() + e->mu * beta() + e->eta * aN) * (p + q) + I_unit * aN * (p - q);
        } else if (auto* a = std::get_if<AnomalousMagnetic>(&c)) {
            const Mat4 A = 0.5 * (a->zeta * gamma5() + I_unit * a->upsilon * beta() * aN);
            v = (A + I_unit * aN) * p + (A - I_unit * aN) * q;
        } else {
            const auto& pr = std::get<Projected>(c);
            v = pr.eps * mit_projector(pr.sign) * (p + q) + I_unit * aN * (p - q);
        }
        r.segment<4>(long(4 * i)) = v;
    }
    TransmissionReport rep;
    const double scale = weighted_norm(mesh, phi_plus) + weighted_norm(mesh, phi_minus);
    if (scale == 0.0) return rep;
    rep.residual = weighted_norm(mesh, r) / scale;
    if (auto* a = std::get_if<AnomalousMagnetic>(&c); a && a->zeta == 0.0 && std::abs(a->upsilon) == 2.0) {
        const Mat4 Pm = zigzag_projector(-1, a->upsilon), Pp = zigzag_projector(1, a->upsilon);
        rep.zigzag_plus = weighted_norm(mesh, apply_nodewise(mesh.size(), phi_plus, [&](std::size_t) { return Pm; })) / scale;
        rep.zigzag_minus = weighted_norm(mesh, apply_nodewise(mesh.size(), phi_minus, [&](std::size_t) { return Pp; })) / scale;
    }
    return rep;
}

// Traces of Phi^z[g] on both sides: t phi_+- = -+ (i/2) alpha.N g + C g.
inline std::pair<CVector, CVector> layer_traces(const SurfaceMesh& mesh, const LayerParts& L, const CVector& g) {
    const CVector Cg = apply_cauchy(L, g);
    const CVector jump = apply_nodewise(mesh.size(), g, [&](std::size_t i) { return Mat4(0.5 * I_unit * alpha_dot(mesh.normals[i])); });
    return {Cg - jump, Cg + jump};
}

} // namespace dshell
