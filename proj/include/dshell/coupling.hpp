#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <type_traits>
#include <variant>

#include "dshell/error.hpp"

namespace dshell {

struct ElectroScalar {
    double eps = 0.0, mu = 0.0, eta = 0.0;
};
struct AnomalousMagnetic {
    double zeta = 0.0, upsilon = 0.0;
};
// 2 eps P_sign delta, P_sign = (I + sign beta)/2
struct Projected {
    double eps = 1.0;
    int sign = 1;
};
using Coupling = std::variant<ElectroScalar, AnomalousMagnetic, Projected>;

inline double sgn_kappa(const ElectroScalar& c) { return c.eps * c.eps - c.mu * c.mu - c.eta * c.eta; }

inline bool is_critical(const ElectroScalar& c, double tol = 1e-12) {
    return std::abs(sgn_kappa(c) - 4.0) <= tol * std::max(1.0, c.eps * c.eps + c.mu * c.mu + c.eta * c.eta);
}

inline void validate(const Coupling& c) {
    std::visit(
        [](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, ElectroScalar>) {
                const double scale = v.eps * v.eps + v.mu * v.mu + v.eta * v.eta;
                if (std::abs(sgn_kappa(v)) <= 1e-12 * std::max(1.0, scale))
                    fail(ErrorKind::invalid_coupling, "eps^2 - mu^2 - eta^2 must be nonzero");
            } else if constexpr (std::is_same_v<T, AnomalousMagnetic>) {
                if (v.zeta * v.zeta + v.upsilon * v.upsilon == 0.0)
                    fail(ErrorKind::invalid_coupling, "zeta^2 + upsilon^2 must be nonzero");
            } else {
                if (v.eps == 0.0) fail(ErrorKind::invalid_coupling, "projected coupling needs eps != 0");
                if (v.sign != 1 && v.sign != -1) fail(ErrorKind::invalid_coupling, "projected sign must be +1 or -1");
            }
        },
        c);
}

inline std::string describe(const Coupling& c) {
    char buf[160];
    if (auto* e = std::get_if<ElectroScalar>(&c))
        std::snprintf(buf, sizeof buf, "electro_scalar(eps=%.17g,mu=%.17g,eta=%.17g)", e->eps, e->mu, e->eta);
    else if (auto* a = std::get_if<AnomalousMagnetic>(&c))
        std::snprintf(buf, sizeof buf, "anomalous_magnetic(zeta=%.17g,upsilon=%.17g)", a->zeta, a->upsilon);
    else {
        auto& p = std::get<Projected>(c);
        std::snprintf(buf, sizeof buf, "projected(eps=%.17g,sign=%+d)", p.eps, p.sign);
    }
    return buf;
}

// kappa~ = (-eps, mu, -eta)
inline ElectroScalar mirrored(const ElectroScalar& c) { return {-c.eps, c.mu, -c.eta}; }

enum class Branch { plus, minus };

} // namespace dshell
