#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dshell/clifford.hpp"
#include "dshell/coupling.hpp"
#include "dshell/error.hpp"

namespace dshell {

// Flat interface R^2 x {0}, Omega_+ = {x3 > 0}, outward normal N = (0, 0, -1).

struct SymbolPoint {
    double a = 0.0;
    double m = 1.0;
    ElectroScalar kappa;
    Eigen::Vector2d xi = Eigen::Vector2d::Zero();
};

namespace detail {

inline void require_gap(double a, double m) {
    if (!(m > 0.0)) fail(ErrorKind::invalid_argument, "mass must be positive");
    if (!(std::abs(a) < m)) fail(ErrorKind::inadmissible_energy, "a must lie in (-m, m)");
}

inline void require_nonzero_sgn(const ElectroScalar& k) { validate(Coupling{k}); }

inline double symbol_k(double a, double m, double xi_norm) { return std::sqrt(xi_norm * xi_norm + m * m - a * a); }

// mu beta + eta alpha.N with N = (0, 0, -1)
inline Mat4 flat_b(const ElectroScalar& k) { return k.mu * beta() - k.eta * alpha(2); }

} // namespace detail

// Pi_+ = (eps - B)/sgn + Gamma_{m,a}/(2k); Pi_- = (eps + B)/sgn - Gamma_{m,a}/(2k)
inline Mat4 symbol_pi(const SymbolPoint& s, Branch b = Branch::plus) {
    detail::require_gap(s.a, s.m);
    detail::require_nonzero_sgn(s.kappa);
    const double sg = sgn_kappa(s.kappa);
    const double k = detail::symbol_k(s.a, s.m, s.xi.norm());
    const Mat4 G = gamma_ma(s.m, s.a, s.xi[0], s.xi[1]);
    const Mat4 B = detail::flat_b(s.kappa);
    if (b == Branch::plus) return (s.kappa.eps * id4() - B) / sg + G / (2.0 * k);
    return (s.kappa.eps * id4() + B) / sg - G / (2.0 * k);
}

inline Mat4 symbol_pi_plus(const SymbolPoint& s) { return symbol_pi(s, Branch::plus); }

// (4 - sgn)/4 + (eps a + mu m)/k;  det Pi_+ = C^2 / sgn^2
inline double c_scalar(double a, double m, const ElectroScalar& kappa, double xi_norm) {
    detail::require_gap(a, m);
    return (4.0 - sgn_kappa(kappa)) / 4.0 + (kappa.eps * a + kappa.mu * m) / detail::symbol_k(a, m, xi_norm);
}

// C^{-1} [(1 + (eps a + mu m)/k) - (eps + B) Gamma/(2k)] (eps + B), valid for every sgn
// including the critical value, where C reduces to (eps a + mu m)/k.
inline Mat4 symbol_inverse(const SymbolPoint& s) {
    detail::require_gap(s.a, s.m);
    detail::require_nonzero_sgn(s.kappa);
    const double k = detail::symbol_k(s.a, s.m, s.xi.norm());
    const double lin = s.kappa.eps * s.a + s.kappa.mu * s.m;
    const double c0 = (4.0 - sgn_kappa(s.kappa)) / 4.0;
    const double C = c0 + lin / k;
    if (std::abs(C) <= 1e-12 * (std::abs(c0) + std::abs(lin) / k + 1.0))
        fail(ErrorKind::singular, "symbol is singular at this (a, xi)");
    const Mat4 EB = s.kappa.eps * id4() + detail::flat_b(s.kappa);
    const Mat4 G = gamma_ma(s.m, s.a, s.xi[0], s.xi[1]);
    return ((1.0 + lin / k) * id4() - EB * G / (2.0 * k)) * EB / C;
}

// |xi|^2 at which C vanishes (given the sign condition), as a function of a.
inline double p_poly(double a, double m, const ElectroScalar& kappa) {
    const double s = sgn_kappa(kappa);
    if (std::abs(s - 4.0) <= 1e-12 * std::max(1.0, std::abs(s))) fail(ErrorKind::critical_coupling, "p_poly needs sgn != 4");
    const double d2 = (s - 4.0) * (s - 4.0);
    const double e = kappa.eps, mu = kappa.mu;
    return ((d2 + 16.0 * e * e) * a * a + 32.0 * e * mu * m * a - (d2 - 16.0 * mu * mu) * m * m) / d2;
}

// 4(eps a + mu m)/(sgn - 4) > 0
inline bool sign_condition(double a, double m, const ElectroScalar& kappa) {
    return 4.0 * (kappa.eps * a + kappa.mu * m) / (sgn_kappa(kappa) - 4.0) > 0.0;
}

struct GapThresholds {
    std::optional<double> a_plus, a_minus, a_star;
};

// Roots of P. The double root is returned as a_star when eps^2 - mu^2 = -4, eta = 0.
inline GapThresholds gap_thresholds(double m, const ElectroScalar& kappa) {
    if (!(m > 0.0)) fail(ErrorKind::invalid_argument, "mass must be positive");
    detail::require_nonzero_sgn(kappa);
    const double s = sgn_kappa(kappa);
    if (is_critical(kappa)) fail(ErrorKind::critical_coupling, "gap thresholds are undefined at sgn = 4");
    const double e = kappa.eps, mu = kappa.mu, eta = kappa.eta;
    const double d2 = (s - 4.0) * (s - 4.0);
    const double den = d2 + 16.0 * e * e;
    GapThresholds t;
    if (eta == 0.0 && std::abs(s + 4.0) <= 1e-12 * std::max(1.0, std::abs(s))) {
        t.a_star = -m * 16.0 * e * mu / den + 0.0;
        return t;
    }
    const double root = d2 * std::sqrt(((s + 4.0) * (s + 4.0) + 16.0 * eta * eta) / d2);
    t.a_plus = m * (-16.0 * e * mu + root) / den + 0.0;
    t.a_minus = m * (-16.0 * e * mu - root) / den + 0.0;
    return t;
}

// ---------------------------------------------------------------------------
// SpectrumSet

enum class PointTag { embedded, eigenvalue_infinite_multiplicity };

inline const char* to_string(PointTag t) {
    return t == PointTag::embedded ? "embedded" : "eigenvalue_infinite_multiplicity";
}

struct SpectrumSet {
    struct Interval {
        double lo, hi;  // closed; infinite ends allowed
        bool operator==(const Interval&) const = default;
    };
    struct Point {
        double value;
        PointTag tag;
        bool operator==(const Point&) const = default;
    };
    std::vector<Interval> rays;
    std::vector<Point> points;

    bool operator==(const SpectrumSet&) const = default;

    bool is_whole_line() const {
        return rays.size() == 1 && std::isinf(rays[0].lo) && rays[0].lo < 0 && std::isinf(rays[0].hi) &&
               rays[0].hi > 0;
    }

    // Sort and merge overlapping or touching intervals; drop points already covered.
    void normalize() {
        std::sort(rays.begin(), rays.end(), [](auto& x, auto& y) { return x.lo < y.lo; });
        std::vector<Interval> out;
        for (auto& r : rays) {
            if (!out.empty() && r.lo <= out.back().hi)
                out.back().hi = std::max(out.back().hi, r.hi);
            else
                out.push_back(r);
        }
        rays = out;
        std::erase_if(points, [&](const Point& p) {
            return std::any_of(rays.begin(), rays.end(), [&](auto& r) { return p.value >= r.lo && p.value <= r.hi; });
        });
        std::sort(points.begin(), points.end(), [](auto& x, auto& y) { return x.value < y.value; });
    }

    bool contains(double x) const {
        for (auto& r : rays)
            if (x >= r.lo && x <= r.hi) return true;
        for (auto& p : points)
            if (p.value == x) return true;
        return false;
    }

    // Portion inside [-m, m] as closed intervals.
    std::vector<Interval> gap_part(double m) const {
        std::vector<Interval> out;
        for (auto& r : rays) {
            const double lo = std::max(r.lo, -m), hi = std::min(r.hi, m);
            if (lo < hi) out.push_back({lo, hi});
        }
        return out;
    }
};

namespace detail {

inline std::string format_number(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    x += 0.0;
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

inline double parse_number(std::string_view s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        fail(ErrorKind::invalid_argument, "bad number '" + std::string(s) + "' in spectrum text");
    return v;
}

} // namespace detail

// "(-inf,a] U [b,c] U {p:tag} U [d,inf)" ordered by left end, or "R"; "{}" when empty.
inline std::string to_text(const SpectrumSet& s) {
    if (s.is_whole_line() && s.points.empty()) return "R";
    struct Item {
        double key;
        std::string text;
    };
    std::vector<Item> items;
    for (auto& r : s.rays) {
        std::string t = (std::isinf(r.lo) ? "(" : "[") + detail::format_number(r.lo) + "," +
                        detail::format_number(r.hi) + (std::isinf(r.hi) ? ")" : "]");
        items.push_back({r.lo, t});
    }
    for (auto& p : s.points)
        items.push_back({p.value, "{" + detail::format_number(p.value) + ":" + to_string(p.tag) + "}"});
    std::stable_sort(items.begin(), items.end(), [](auto& x, auto& y) { return x.key < y.key; });
    if (items.empty()) return "{}";
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? " U " : "") + items[i].text;
    return out;
}

inline SpectrumSet parse_spectrum(std::string_view text) {
    SpectrumSet s;
    if (text == "R") {
        s.rays.push_back({-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()});
        return s;
    }
    if (text == "{}") return s;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto next = text.find(" U ", pos);
        const auto tok = text.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
        if (tok.size() < 3) fail(ErrorKind::invalid_argument, "bad spectrum token");
        if (tok.front() == '{' && tok.back() == '}') {
            const auto colon = tok.find(':');
            if (colon == std::string_view::npos) fail(ErrorKind::invalid_argument, "point without tag");
            const auto tag = tok.substr(colon + 1, tok.size() - colon - 2);
            PointTag t;
            if (tag == "embedded")
                t = PointTag::embedded;
            else if (tag == "eigenvalue_infinite_multiplicity")
                t = PointTag::eigenvalue_infinite_multiplicity;
            else
                fail(ErrorKind::invalid_argument, "unknown point tag '" + std::string(tag) + "'");
            s.points.push_back({detail::parse_number(tok.substr(1, colon - 1)), t});
        } else {
            const auto comma = tok.find(',');
            if (comma == std::string_view::npos || (tok.front() != '(' && tok.front() != '[') ||
                (tok.back() != ')' && tok.back() != ']'))
                fail(ErrorKind::invalid_argument, "bad interval '" + std::string(tok) + "'");
            const double lo = detail::parse_number(tok.substr(1, comma - 1));
            const double hi = detail::parse_number(tok.substr(comma + 1, tok.size() - comma - 2));
            if ((tok.front() == '(') != std::isinf(lo) || (tok.back() == ')') != std::isinf(hi) || !(lo <= hi))
                fail(ErrorKind::invalid_argument, "bad interval '" + std::string(tok) + "'");
            s.rays.push_back({lo, hi});
        }
        if (next == std::string_view::npos) break;
        pos = next + 3;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Classification

// a is in the essential spectrum (inside the gap) iff C(a, xi) = 0 for some xi, i.e.
// K(a) = 4(eps a + mu m)/(sgn - 4) >= sqrt(m^2 - a^2). K is affine and the right side
// concave, so the failing set is one interval whose ends are roots of P.
inline SpectrumSet essential_spectrum(double m, const ElectroScalar& kappa,
                                      PointTag critical_tag = PointTag::embedded) {
    if (!(m > 0.0)) fail(ErrorKind::invalid_argument, "mass must be positive");
    detail::require_nonzero_sgn(kappa);
    constexpr double inf = std::numeric_limits<double>::infinity();
    SpectrumSet out;
    out.rays = {{-inf, -m}, {m, inf}};
    const double s = sgn_kappa(kappa);
    if (is_critical(kappa)) {
        out.points.push_back({-m * kappa.mu / kappa.eps + 0.0, critical_tag});
        out.normalize();
        return out;
    }
    if (kappa.eta != 0.0 && s < 0.0)
        fail(ErrorKind::unsupported, "classification for eta != 0 and sgn < 0 is not available");
    auto K = [&](double a) { return 4.0 * (kappa.eps * a + kappa.mu * m) / (s - 4.0); };
    const auto t = gap_thresholds(m, kappa);
    std::vector<double> roots;
    for (const auto& r : {t.a_minus, t.a_star, t.a_plus})
        if (r && K(*r) > 0.0) roots.push_back(std::clamp(*r, -m, m));
    const bool left = K(-m) > 0.0, right = K(m) > 0.0;
    if (left && right) {
        if (roots.size() == 2 && roots[0] < roots[1]) {
            out.rays = {{-inf, roots[0]}, {roots[1], inf}};
        } else {
            out.rays = {{-inf, inf}};
        }
    } else if (right && !roots.empty()) {
        out.rays = {{-inf, -m}, {roots.back(), inf}};
    } else if (left && !roots.empty()) {
        out.rays = {{-inf, roots.front()}, {m, inf}};
    }
    out.normalize();
    return out;
}

// Nontrivial eigenvalue of <xi> Pi_+ at the critical point a = -m mu/eps.
inline double theta1(double xi_norm, double m, const ElectroScalar& kappa) {
    if (!is_critical(kappa)) fail(ErrorKind::critical_coupling, "theta1 needs sgn = 4");
    const double a = -m * kappa.mu / kappa.eps;
    return std::sqrt(1.0 + xi_norm * xi_norm) * (a / detail::symbol_k(a, m, xi_norm) + kappa.eps / 2.0);
}

// Brute-force reference: a is flagged when the inertia of the Hermitian Pi_+(a, xi)
// changes between consecutive points of a radial xi grid; transitions along the a grid
// are bisected. Returns closed sub-intervals of [-m, m].
inline std::vector<SpectrumSet::Interval> oracle_gap_set(double m, const ElectroScalar& kappa, int a_points = 2000,
                                                         int xi_points = 24, double tol = 1e-13) {
    detail::require_nonzero_sgn(kappa);
    std::vector<double> xis{0.0};
    for (int j = 0; j < xi_points; ++j) xis.push_back(1e-3 * std::pow(1e11, double(j) / (xi_points - 1)));
    auto inertia = [&](double a, double xn) {
        SymbolPoint p{a, m, kappa, Eigen::Vector2d(xn, 0.0)};
        Eigen::SelfAdjointEigenSolver<Mat4> es(symbol_pi_plus(p), Eigen::EigenvaluesOnly);
        int neg = 0;
        for (int i = 0; i < 4; ++i) neg += es.eigenvalues()[i] < 0.0;
        return neg;
    };
    auto singular = [&](double a) {
        int prev = inertia(a, xis[0]);
        for (std::size_t j = 1; j < xis.size(); ++j) {
            const int cur = inertia(a, xis[j]);
            if (cur != prev) return true;
            prev = cur;
        }
        return false;
    };
    auto bisect = [&](double lo, double hi, bool flo) {
        while (hi - lo > tol) {
            const double mid = 0.5 * (lo + hi);
            (singular(mid) == flo ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };
    std::vector<SpectrumSet::Interval> out;
    const double da = 2.0 * m / a_points;
    double prev_a = -m + 0.5 * da;
    bool prev = singular(prev_a);
    double start = prev ? -m : 0.0;
    for (int i = 1; i < a_points; ++i) {
        const double a = -m + (i + 0.5) * da;
        const bool cur = singular(a);
        if (cur != prev) {
            const double edge = bisect(prev_a, a, prev);
            if (cur)
                start = edge;
            else
                out.push_back({start, edge});
        }
        prev = cur;
        prev_a = a;
    }
    if (prev) out.push_back({start, m});
    return out;
}

// ---------------------------------------------------------------------------
// Flat eigenfunctions at the critical point

// One quadrature momentum of the spectral profile; `value` carries the quadrature weight.
struct ProfileSample {
    Eigen::Vector2d xi;
    Vec4 value;
};

class FlatEigenfunction {
public:
    FlatEigenfunction(double m, const ElectroScalar& kappa, const std::vector<ProfileSample>& profile)
        : m_(m), kappa_(kappa) {
        if (!is_critical(kappa)) fail(ErrorKind::critical_coupling, "flat eigenfunctions need sgn = 4");
        if (!(m > 0.0)) fail(ErrorKind::invalid_argument, "mass must be positive");
        a_ = -m * kappa.mu / kappa.eps;
        for (const auto& p : profile) {
            Mode md;
            md.xi = p.xi;
            md.k = detail::symbol_k(a_, m, p.xi.norm());
            md.plus = project_kernel(p.xi, md.k, p.value);
            md.minus = lower_relation() * md.plus;
            modes_.push_back(md);
        }
    }

    double energy() const { return a_; }

    // psi_- = -((eta - 2i)/(eps^2 - mu^2)) (eps - mu beta) alpha_3 psi_+
    Mat4 lower_relation() const {
        const double e = kappa_.eps, mu = kappa_.mu;
        return -((kappa_.eta - 2.0 * I_unit) / (e * e - mu * mu)) * (e * id4() - mu * beta()) * alpha(2);
    }

    Mat4 gamma_plus_i(const Eigen::Vector2d& xi, double k) const {
        return alpha_dot(CVec3(xi[0], xi[1], I_unit * k)) + m_ * beta() + a_ * id4();
    }
    Mat4 gamma_minus_i(const Eigen::Vector2d& xi, double k) const {
        return alpha_dot(CVec3(xi[0], xi[1], -I_unit * k)) + m_ * beta() + a_ * id4();
    }

    // Field at x (x3 != 0).
    Vec4 value(const Vec3& x) const {
        if (x[2] == 0.0) fail(ErrorKind::invalid_argument, "flat eigenfunction is two-valued on x3 = 0");
        return x[2] > 0 ? side(x, true) : side(x, false);
    }

    Vec4 trace(const Eigen::Vector2d& xb, bool upper) const { return side(Vec3(xb[0], xb[1], 0.0), upper); }

    // (2 - i eta) t phi_+ + i alpha_3 (eps + mu beta) t phi_-
    Vec4 transmission_defect(const Eigen::Vector2d& xb) const {
        return (2.0 - I_unit * kappa_.eta) * trace(xb, true) +
               I_unit * alpha(2) * (kappa_.eps * id4() + kappa_.mu * beta()) * trace(xb, false);
    }

private:
    struct Mode {
        Eigen::Vector2d xi;
        double k;
        Vec4 plus, minus;
    };

    // Project onto the kernel of the transmission map (A + i aN) Gamma_{+i} + (A - i aN) Gamma_{-i} M.
    Vec4 project_kernel(const Eigen::Vector2d& xi, double k, const Vec4& v) const {
        const Mat4 aN = -alpha(2);
        const Mat4 A = 0.5 * (kappa_.eps * id4() + kappa_.mu * beta() + kappa_.eta * aN);
        const Mat4 T = (A + I_unit * aN) * gamma_plus_i(xi, k) + (A - I_unit * aN) * gamma_minus_i(xi, k) * lower_relation();
        Eigen::JacobiSVD<Mat4> svd(T, Eigen::ComputeFullV);
        const double smax = svd.singularValues()[0];
        Vec4 out = Vec4::Zero();
        for (int j = 0; j < 4; ++j)
            if (svd.singularValues()[j] <= 1e-10 * std::max(smax, 1.0)) {
                const Vec4 col = svd.matrixV().col(j);
                out += col * col.dot(v);
            }
        return out;
    }

    Vec4 side(const Vec3& x, bool upper) const {
        Vec4 out = Vec4::Zero();
        for (const auto& md : modes_) {
            const cplx ph = std::exp(I_unit * (md.xi[0] * x[0] + md.xi[1] * x[1]));
            if (upper)
                out += ph * std::exp(-x[2] * md.k) * (gamma_plus_i(md.xi, md.k) * md.plus);
            else
                out += ph * std::exp(x[2] * md.k) * (gamma_minus_i(md.xi, md.k) * md.minus);
        }
        return out / (2.0 * std::numbers::pi);
    }

    double m_, a_ = 0.0;
    ElectroScalar kappa_;
    std::vector<Mode> modes_;
};

inline std::vector<Vec4> flat_eigenfunction(double m, const ElectroScalar& kappa,
                                            const std::vector<ProfileSample>& profile,
                                            const std::vector<Vec3>& points) {
    FlatEigenfunction f(m, kappa, profile);
    std::vector<Vec4> out;
    out.reserve(points.size());
    for (const auto& x : points) out.push_back(f.value(x));
    return out;
}

} // namespace dshell
