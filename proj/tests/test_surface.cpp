#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "dshell/surface.hpp"

using namespace dshell;

TEST(Surface, SphereGeometry) {
    const auto s = make_sphere(2.0, 300);
    ASSERT_EQ(s.size(), 300u);
    EXPECT_NEAR(s.total_weight(), 4.0 * std::numbers::pi * 4.0, 1e-10);
    EXPECT_TRUE(s.equal_weights());
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_NEAR(s.nodes[i].norm(), 2.0, 1e-13);
        EXPECT_NEAR(s.normals[i].norm(), 1.0, 1e-14);
        EXPECT_LT((s.normals[i] - s.nodes[i] / 2.0).norm(), 1e-14);
    }
    EXPECT_NEAR(s.spacing, std::sqrt(4.0 * std::numbers::pi * 4.0 / 300.0), 1e-12);
}

TEST(Surface, MeshSizeShrinksWithRefinement) {
    const double h1 = make_sphere(1.0, 128).h, h2 = make_sphere(1.0, 512).h;
    EXPECT_LT(h2, h1);
    EXPECT_NEAR(h1 / h2, 2.0, 0.4);
}

TEST(Surface, SphereQuadratureIntegratesPolynomials) {
    const auto s = make_sphere(1.0, 2000);
    double zz = 0.0, x = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        zz += s.weights[i] * s.nodes[i][2] * s.nodes[i][2];
        x += s.weights[i] * s.nodes[i][0];
    }
    EXPECT_NEAR(zz, 4.0 * std::numbers::pi / 3.0, 1e-3);
    EXPECT_NEAR(x, 0.0, 1e-3);
}

TEST(Surface, BumpProfileSmoothness) {
    const BumpProfile b{1.5, 0.7};
    EXPECT_NEAR(b.value(0.0), 0.7, 1e-15);
    EXPECT_EQ(b.value(1.5), 0.0);
    EXPECT_EQ(b.value(2.0), 0.0);
    EXPECT_LT(b.value(1.49), 1e-20);
    const double h = 1e-5;
    for (double r : {0.2, 0.7, 1.2}) {
        const Vec2 x(r * 0.6, r * 0.8);
        const Vec2 g = b.gradient(x);
        const double dx = (b.value(Vec2(x[0] + h, x[1])) - b.value(Vec2(x[0] - h, x[1]))) / (2 * h);
        const double dy = (b.value(Vec2(x[0], x[1] + h)) - b.value(Vec2(x[0], x[1] - h))) / (2 * h);
        EXPECT_NEAR(g[0], dx, 1e-7);
        EXPECT_NEAR(g[1], dy, 1e-7);
        const double d2 = (b.value(r + h) - 2 * b.value(r) + b.value(r - h)) / (h * h);
        EXPECT_NEAR(b.second_radial(r), d2, 1e-4);
    }
}

TEST(Surface, FlatGraph) {
    const BumpProfile b{1.0, 0.5};
    const auto s = make_graph(0.0, b, 32 * 32, 4.0);
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_EQ(s.nodes[i][2], 0.0);
        EXPECT_LT((s.normals[i] - Vec3d(0, 0, -1)).norm(), 1e-15);
        EXPECT_EQ(s.flat_mask[i], s.nodes[i].head<2>().norm() >= 1.0);
    }
    EXPECT_NEAR(s.total_weight(), std::numbers::pi * 16.0, 0.5);
    EXPECT_FALSE(s.kind == SurfaceKind::sphere);
}

TEST(Surface, DeformedGraphNormalsAndWeights) {
    const BumpProfile b{1.0, 0.5};
    const auto s = make_graph(0.8, b, 40 * 40, 3.0);
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_NEAR(s.normals[i].norm(), 1.0, 1e-14);
        EXPECT_LT(s.normals[i][2], 0.0);
        const Vec2 xb = s.nodes[i].head<2>();
        EXPECT_NEAR(s.nodes[i][2], 0.8 * b.value(xb), 1e-15);
        // normal is orthogonal to the tangent (1, 0, nu d1 phi)
        const Vec2 g = 0.8 * b.gradient(xb);
        EXPECT_NEAR(s.normals[i].dot(Vec3d(1, 0, g[0])), 0.0, 1e-14);
    }
}

TEST(Surface, TruncationRadius) {
    EXPECT_NEAR(default_truncation_radius(1.0, 1.0, 0.0), 7.0, 1e-15);
    EXPECT_NEAR(default_truncation_radius(2.0, 1.0, 0.6), 2.0 + 6.0 / 0.8, 1e-14);
    EXPECT_THROW(default_truncation_radius(1.0, 1.0, 1.0), Error);
}

TEST(Surface, InvalidInputs) {
    EXPECT_THROW(make_sphere(1.0, 4), Error);
    EXPECT_THROW(make_sphere(-1.0, 100), Error);
    EXPECT_THROW(make_graph(-0.1, BumpProfile{}, 100, 3.0), Error);
    EXPECT_THROW(make_graph(0.1, BumpProfile{}, 100, 0.5), Error);
}

TEST(Surface, NodeIndexMatchesBruteForce) {
    const auto s = make_sphere(1.0, 500);
    const NodeIndex idx(s);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 50; ++t) {
        Vec3d p(nd(rng), nd(rng), nd(rng));
        p = p.normalized() * (0.9 + 0.2 * std::abs(nd(rng)));
        std::vector<std::size_t> all(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) all[i] = i;
        std::sort(all.begin(), all.end(),
                  [&](auto a, auto b) { return (s.nodes[a] - p).squaredNorm() < (s.nodes[b] - p).squaredNorm(); });
        const auto near = idx.nearest(p, 7);
        for (std::size_t k = 0; k < 7; ++k) EXPECT_EQ(near[k], all[k]);
        const auto w = idx.within(p, 0.2);
        std::size_t count = 0;
        for (auto i : all) count += (s.nodes[i] - p).norm() <= 0.2;
        EXPECT_EQ(w.size(), count);
    }
}

TEST(Surface, DumpMeshOneLinePerNode) {
    const auto s = make_sphere(1.0, 50);
    std::ostringstream os;
    dump_mesh(s, os);
    std::istringstream is(os.str());
    std::string line;
    std::size_t lines = 0;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        double v[7];
        int flag = -1;
        for (double& x : v) ls >> x;
        ls >> flag;
        EXPECT_FALSE(ls.fail());
        EXPECT_EQ(flag, 0);
        ++lines;
    }
    EXPECT_EQ(lines, 50u);
}
