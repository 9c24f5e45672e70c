// Essential spectrum of the flat interface for a few couplings, with the gap
// thresholds and, at the critical point, the embedded energy and theta1(0).
#include <cstdio>

#include "dshell/flat_symbol.hpp"

int main() {
    using namespace dshell;
    const double m = 1.0;
    const ElectroScalar couplings[] = {{3.0, 1.0, 0.0}, {-3.0, 1.0, 0.0}, {1.0, 0.5, 0.0}, {1.0, 2.0, 0.0},
                                       {1.0, -2.0, 0.0}, {0.0, -2.0, 0.0}, {1.0, -3.0, 0.0}, {2.5, 1.5, 0.0}};
    for (const auto& k : couplings) {
        std::printf("%-28s sgn=%-6g %s\n", describe(k).c_str(), sgn_kappa(k), to_text(essential_spectrum(m, k)).c_str());
        if (is_critical(k)) {
            std::printf("%28s embedded at %g, theta1(0)=%g\n", "", -m * k.mu / k.eps, theta1(0.0, m, k));
            continue;
        }
        const auto t = gap_thresholds(m, k);
        if (t.a_star) std::printf("%28s a*=%g\n", "", *t.a_star);
        if (t.a_plus) std::printf("%28s a+=%g a-=%g\n", "", *t.a_plus, *t.a_minus);
    }
}
