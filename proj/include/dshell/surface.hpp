#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "dshell/error.hpp"

namespace dshell {

using Vec2 = Eigen::Vector2d;
using Vec3d = Eigen::Vector3d;

// phi(r) = A exp(1 - 1/(1 - r^2/R^2)) for r < R, 0 otherwise.
struct BumpProfile {
    double radius = 1.0;
    double amplitude = 0.5;

    double value(double r) const {
        if (r >= radius) return 0.0;
        const double s = r * r / (radius * radius);
        return amplitude * std::exp(1.0 - 1.0 / (1.0 - s));
    }
    double value(const Vec2& xb) const { return value(xb.norm()); }

    Vec2 gradient(const Vec2& xb) const {
        const double r = xb.norm();
        if (r >= radius) return Vec2::Zero();
        const double s = r * r / (radius * radius);
        const double f = value(r);
        return f * (-2.0 / (radius * radius * (1.0 - s) * (1.0 - s))) * xb;
    }

    // d^2 phi / dr^2, used only by smoothness checks.
    double second_radial(double r) const {
        if (r >= radius) return 0.0;
        const double R2 = radius * radius;
        const double s = r * r / R2;
        const double u = 1.0 - s;
        const double g = -2.0 * r / (R2 * u * u);  // (log f)'
        const double dg = -2.0 / (R2 * u * u) - 8.0 * r * r / (R2 * R2 * u * u * u);
        return value(r) * (g * g + dg);
    }
};

enum class SurfaceKind { sphere, graph };

struct SurfaceMesh {
    std::vector<Vec3d> nodes;
    std::vector<Vec3d> normals;  // outward of Omega_+
    std::vector<double> weights;
    std::vector<bool> flat_mask;
    double h = 0.0;        // max nearest-neighbour distance
    double spacing = 0.0;  // sqrt(mean weight)
    SurfaceKind kind = SurfaceKind::sphere;
    double radius = 1.0;   // sphere
    double nu = 0.0;       // graph
    BumpProfile bump;      // graph
    double r_trunc = 0.0;  // graph
    std::string id;

    std::size_t size() const { return nodes.size(); }
    double total_weight() const {
        double s = 0.0;
        for (double w : weights) s += w;
        return s;
    }
    bool equal_weights() const {
        return std::all_of(weights.begin(), weights.end(), [&](double w) { return w == weights.front(); });
    }
};

namespace detail {

inline double max_nearest_neighbour(const std::vector<Vec3d>& x) {
    double hmax = 0.0;
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) best = std::min(best, (x[i] - x[j]).squaredNorm());
        hmax = std::max(hmax, best);
    }
    return std::sqrt(hmax);
}

inline void finalize(SurfaceMesh& s) {
    s.h = max_nearest_neighbour(s.nodes);
    s.spacing = std::sqrt(s.total_weight() / double(s.size()));
}

} // namespace detail

// Fibonacci spiral, equal weights 4 pi R^2 / n, normals x / R.
inline SurfaceMesh make_sphere(double R, std::size_t n) {
    if (n < 8) fail(ErrorKind::invalid_argument, "make_sphere: need n >= 8");
    if (!(R > 0.0)) fail(ErrorKind::invalid_argument, "make_sphere: R must be positive");
    SurfaceMesh s;
    s.kind = SurfaceKind::sphere;
    s.radius = R;
    s.nodes.reserve(n);
    const double golden = std::numbers::pi * (1.0 + std::sqrt(5.0));
    for (std::size_t i = 0; i < n; ++i) {
        const double t = double(i) + 0.5;
        const double z = 1.0 - 2.0 * t / double(n);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double th = golden * t;
        Vec3d u(r * std::cos(th), r * std::sin(th), z);
        u.normalize();
        s.nodes.push_back(R * u);
        s.normals.push_back(u);
    }
    s.weights.assign(n, 4.0 * std::numbers::pi * R * R / double(n));
    s.flat_mask.assign(n, false);
    std::ostringstream os;
    os << "sphere(R=" << R << ",n=" << n << ")";
    s.id = os.str();
    detail::finalize(s);
    return s;
}

// R_b + 6 / sqrt(m^2 - a_max^2)
inline double default_truncation_radius(double bump_radius, double m, double a_max) {
    if (!(std::abs(a_max) < m)) fail(ErrorKind::inadmissible_energy, "a_max must lie in (-m, m)");
    return bump_radius + 6.0 / std::sqrt(m * m - a_max * a_max);
}

// Midpoint rule on a sqrt(n_core) x sqrt(n_core) grid over [-R_trunc, R_trunc]^2,
// clipped to the disk and lifted by x -> (x, nu phi(x)).
inline SurfaceMesh make_graph(double nu, const BumpProfile& bump, std::size_t n_core, double r_trunc) {
    if (nu < 0.0) fail(ErrorKind::invalid_argument, "make_graph: nu must be nonnegative");
    if (!(bump.radius > 0.0)) fail(ErrorKind::invalid_argument, "make_graph: bump radius must be positive");
    if (!(r_trunc > bump.radius)) fail(ErrorKind::invalid_argument, "make_graph: R_trunc must exceed the bump radius");
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(double(n_core))));
    if (side < 2) fail(ErrorKind::invalid_argument, "make_graph: n_core too small");
    SurfaceMesh s;
    s.kind = SurfaceKind::graph;
    s.nu = nu;
    s.bump = bump;
    s.r_trunc = r_trunc;
    const double d = 2.0 * r_trunc / double(side);
    for (std::size_t i = 0; i < side; ++i)
        for (std::size_t j = 0; j < side; ++j) {
            const Vec2 xb(-r_trunc + (double(i) + 0.5) * d, -r_trunc + (double(j) + 0.5) * d);
            if (xb.norm() >= r_trunc) continue;
            const Vec2 g = nu * bump.gradient(xb);
            const double J = std::sqrt(1.0 + g.squaredNorm());
            s.nodes.emplace_back(xb[0], xb[1], nu * bump.value(xb));
            s.normals.push_back(Vec3d(g[0], g[1], -1.0) / J);
            s.weights.push_back(d * d * J);
            s.flat_mask.push_back(xb.norm() >= bump.radius);
        }
    std::ostringstream os;
    os << "graph(nu=" << nu << ",Rb=" << bump.radius << ",A=" << bump.amplitude << ",n_core=" << side * side
       << ",Rt=" << r_trunc << ")";
    s.id = os.str();
    detail::finalize(s);
    return s;
}

// One node per line: x y z nx ny nz w flat_flag
inline void dump_mesh(const SurfaceMesh& s, std::ostream& os) {
    char buf[256];
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto& x = s.nodes[i];
        const auto& n = s.normals[i];
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %d\n", x[0], x[1], x[2], n[0],
                      n[1], n[2], s.weights[i], s.flat_mask[i] ? 1 : 0);
        os << buf;
    }
}

// Uniform-grid bucket index over mesh nodes for radius and nearest queries.
class NodeIndex {
public:
    explicit NodeIndex(const SurfaceMesh& s, double cell = 0.0) : nodes_(&s.nodes) {
        cell_ = cell > 0.0 ? cell : std::max(s.spacing, 1e-12);
        for (std::size_t i = 0; i < s.size(); ++i) buckets_[key(cell_of(s.nodes[i]))].push_back(i);
    }

    std::vector<std::size_t> within(const Vec3d& p, double rho) const {
        std::vector<std::size_t> out;
        const auto lo = cell_of(Vec3d(p.array() - rho));
        const auto hi = cell_of(Vec3d(p.array() + rho));
        const double r2 = rho * rho;
        for (long i = lo[0]; i <= hi[0]; ++i)
            for (long j = lo[1]; j <= hi[1]; ++j)
                for (long k = lo[2]; k <= hi[2]; ++k) {
                    auto it = buckets_.find(key({i, j, k}));
                    if (it == buckets_.end()) continue;
                    for (std::size_t q : it->second)
                        if (((*nodes_)[q] - p).squaredNorm() <= r2) out.push_back(q);
                }
        return out;
    }

    std::vector<std::size_t> nearest(const Vec3d& p, std::size_t k) const {
        k = std::min(k, nodes_->size());
        double rho = cell_ * std::sqrt(double(k));
        std::vector<std::size_t> c;
        for (;;) {
            c = within(p, rho);
            if (c.size() >= k) break;
            rho *= 2.0;
        }
        std::partial_sort(c.begin(), c.begin() + long(k), c.end(), [&](std::size_t a, std::size_t b) {
            return ((*nodes_)[a] - p).squaredNorm() < ((*nodes_)[b] - p).squaredNorm();
        });
        c.resize(k);
        return c;
    }

    std::size_t nearest(const Vec3d& p) const { return nearest(p, 1).front(); }

private:
    using Cell = std::array<long, 3>;
    Cell cell_of(const Vec3d& x) const {
        return {long(std::floor(x[0] / cell_)), long(std::floor(x[1] / cell_)), long(std::floor(x[2] / cell_))};
    }
    static std::int64_t key(const Cell& c) {
        return (std::int64_t(c[0] & 0x1FFFFF) << 42) | (std::int64_t(c[1] & 0x1FFFFF) << 21) |
               std::int64_t(c[2] & 0x1FFFFF);
    }
    const std::vector<Vec3d>* nodes_;
    double cell_;
    std::unordered_map<std::int64_t, std::vector<std::size_t>> buckets_;
};

} // namespace dshell
