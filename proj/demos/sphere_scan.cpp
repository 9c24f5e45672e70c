// Birman-Schwinger scan of the gap for an electrostatic shell on the unit sphere.
// Usage: demo_sphere_scan [n=200] [eps=1] [grid=40]
#include <cstdio>
#include <cstdlib>

#include "dshell/spectral.hpp"

int main(int argc, char** argv) {
    using namespace dshell;
    const int n = argc > 1 ? std::atoi(argv[1]) : 200;
    const double eps = argc > 2 ? std::atof(argv[2]) : 1.0;
    const int count = argc > 3 ? std::atoi(argv[3]) : 40;
    try {
        const auto mesh = make_sphere(1.0, std::size_t(n));
        const auto rep = birman_schwinger_scan(mesh, 1.0, ElectroScalar{eps, 0.0, 0.0}, uniform_gap_grid(1.0, count));
        std::printf("# %s  %s  tol=%.4f\n", rep.mesh_id.c_str(), rep.coupling.c_str(), rep.mesh_tol);
        for (std::size_t i = 0; i < rep.a_grid.size(); ++i) std::printf("%9.5f  %.6e\n", rep.a_grid[i], rep.sigma_min[i]);
        for (const auto& c : rep.candidates) std::printf("candidate a=%.10f sigma=%.3e\n", c.a, c.sigma);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return int(e.kind);
    }
}
