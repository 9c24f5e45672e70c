#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dshell/coupling.hpp"
#include "dshell/error.hpp"

namespace dshell {

inline constexpr int kSchemaVersion = 1;

enum class Command { symbol, spectrum, scan, confine, identities };

inline const char* to_string(Command c) {
    switch (c) {
    case Command::symbol: return "symbol";
    case Command::spectrum: return "spectrum";
    case Command::scan: return "scan";
    case Command::confine: return "confine";
    case Command::identities: return "identities";
    }
    return "unknown";
}

struct RunConfig {
    Command command = Command::symbol;
    double m = 1.0;
    std::string coupling = "electro_scalar";  // electro_scalar | anomalous_magnetic | projected
    double eps = 0.0, mu = 0.0, eta = 0.0;
    double zeta = 0.0, upsilon = 0.0;
    int proj_sign = 1;
    bool critical = false;  // required to run symbol/spectrum at sgn = 4
    bool flat = false;      // tag the critical point for nu = 0
    std::string surface = "sphere";  // sphere | graph
    double R = 1.0;
    int n = 512;
    double nu = 0.0, bump_radius = 1.0, bump_amplitude = 0.5;
    int n_core = 4096;
    std::optional<double> r_trunc;  // auto: R_b + 6 / sqrt(m^2 - a_max^2)
    int grid_count = 41;
    std::optional<double> grid_lo, grid_hi;  // auto: the whole gap
    double z_re = 0.0, z_im = 0.5;
    double a = 0.0;  // identities
    int probes = 4;
    double tol_factor = 10.0;
    std::optional<double> mesh_tol;  // auto: c h
    std::string out = "dshell_out";

    bool operator==(const RunConfig&) const = default;

    Coupling make_coupling() const {
        if (coupling == "electro_scalar") return ElectroScalar{eps, mu, eta};
        if (coupling == "anomalous_magnetic") return AnomalousMagnetic{zeta, upsilon};
        return Projected{eps, proj_sign};
    }
};

namespace detail {

inline std::string fmt_double(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline double to_double(const std::string& key, const std::string& v) {
    double x = 0.0;
    auto r = std::from_chars(v.data(), v.data() + v.size(), x);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(x))
        fail(ErrorKind::config, "key '" + key + "': expected a number, got '" + v + "'");
    return x;
}

inline int to_int(const std::string& key, const std::string& v) {
    int x = 0;
    auto r = std::from_chars(v.data(), v.data() + v.size(), x);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size())
        fail(ErrorKind::config, "key '" + key + "': expected an integer, got '" + v + "'");
    return x;
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail(ErrorKind::config, "key '" + key + "': expected true/false, got '" + v + "'");
}

inline std::optional<double> to_opt(const std::string& key, const std::string& v) {
    if (v == "auto") return std::nullopt;
    return to_double(key, v);
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace detail

// Ordered key list; the same names are used as --flags.
inline const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys{
        "command", "m", "coupling", "eps", "mu", "eta", "zeta", "upsilon", "proj_sign", "critical", "flat",
        "surface", "R", "n", "nu", "bump_radius", "bump_amplitude", "n_core", "r_trunc", "grid_count", "grid_lo",
        "grid_hi", "z_re", "z_im", "a", "probes", "tol_factor", "mesh_tol", "out"};
    return keys;
}

inline void set_key(RunConfig& c, const std::string& key, const std::string& v) {
    using namespace detail;
    if (key == "command") {
        if (v == "symbol") c.command = Command::symbol;
        else if (v == "spectrum") c.command = Command::spectrum;
        else if (v == "scan") c.command = Command::scan;
        else if (v == "confine") c.command = Command::confine;
        else if (v == "identities") c.command = Command::identities;
        else fail(ErrorKind::config, "unknown command '" + v + "'");
    } else if (key == "m") c.m = to_double(key, v);
    else if (key == "coupling") c.coupling = v;
    else if (key == "eps") c.eps = to_double(key, v);
    else if (key == "mu") c.mu = to_double(key, v);
    else if (key == "eta") c.eta = to_double(key, v);
    else if (key == "zeta") c.zeta = to_double(key, v);
    else if (key == "upsilon") c.upsilon = to_double(key, v);
    else if (key == "proj_sign") c.proj_sign = to_int(key, v);
    else if (key == "critical") c.critical = to_bool(key, v);
    else if (key == "flat") c.flat = to_bool(key, v);
    else if (key == "surface") c.surface = v;
    else if (key == "R") c.R = to_double(key, v);
    else if (key == "n") c.n = to_int(key, v);
    else if (key == "nu") c.nu = to_double(key, v);
    else if (key == "bump_radius") c.bump_radius = to_double(key, v);
    else if (key == "bump_amplitude") c.bump_amplitude = to_double(key, v);
    else if (key == "n_core") c.n_core = to_int(key, v);
    else if (key == "r_trunc") c.r_trunc = to_opt(key, v);
    else if (key == "grid_count") c.grid_count = to_int(key, v);
    else if (key == "grid_lo") c.grid_lo = to_opt(key, v);
    else if (key == "grid_hi") c.grid_hi = to_opt(key, v);
    else if (key == "z_re") c.z_re = to_double(key, v);
    else if (key == "z_im") c.z_im = to_double(key, v);
    else if (key == "a") c.a = to_double(key, v);
    else if (key == "probes") c.probes = to_int(key, v);
    else if (key == "tol_factor") c.tol_factor = to_double(key, v);
    else if (key == "mesh_tol") c.mesh_tol = to_opt(key, v);
    else if (key == "out") c.out = v;
    else fail(ErrorKind::config, "unknown key '" + key + "'");
}

inline std::string serialize(const RunConfig& c) {
    using detail::fmt_double;
    auto opt = [](const std::optional<double>& v) { return v ? fmt_double(*v) : std::string("auto"); };
    auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    std::ostringstream os;
    os << "schema_version=" << kSchemaVersion << "\n"
       << "command=" << to_string(c.command) << "\n"
       << "m=" << fmt_double(c.m) << "\n"
       << "coupling=" << c.coupling << "\n"
       << "eps=" << fmt_double(c.eps) << "\n"
       << "mu=" << fmt_double(c.mu) << "\n"
       << "eta=" << fmt_double(c.eta) << "\n"
       << "zeta=" << fmt_double(c.zeta) << "\n"
       << "upsilon=" << fmt_double(c.upsilon) << "\n"
       << "proj_sign=" << c.proj_sign << "\n"
       << "critical=" << b(c.critical) << "\n"
       << "flat=" << b(c.flat) << "\n"
       << "surface=" << c.surface << "\n"
       << "R=" << fmt_double(c.R) << "\n"
       << "n=" << c.n << "\n"
       << "nu=" << fmt_double(c.nu) << "\n"
       << "bump_radius=" << fmt_double(c.bump_radius) << "\n"
       << "bump_amplitude=" << fmt_double(c.bump_amplitude) << "\n"
       << "n_core=" << c.n_core << "\n"
       << "r_trunc=" << opt(c.r_trunc) << "\n"
       << "grid_count=" << c.grid_count << "\n"
       << "grid_lo=" << opt(c.grid_lo) << "\n"
       << "grid_hi=" << opt(c.grid_hi) << "\n"
       << "z_re=" << fmt_double(c.z_re) << "\n"
       << "z_im=" << fmt_double(c.z_im) << "\n"
       << "a=" << fmt_double(c.a) << "\n"
       << "probes=" << c.probes << "\n"
       << "tol_factor=" << fmt_double(c.tol_factor) << "\n"
       << "mesh_tol=" << opt(c.mesh_tol) << "\n"
       << "out=" << c.out << "\n";
    return os.str();
}

// key=value lines; '#' starts a comment. Returns the keys in file order.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> kv;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(ErrorKind::config, "line " + std::to_string(lineno) + ": expected key=value");
        kv.emplace_back(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    return kv;
}

inline void validate(const RunConfig& c) {
    if (!(c.m > 0.0)) fail(ErrorKind::invalid_argument, "m must be positive");
    if (c.coupling != "electro_scalar" && c.coupling != "anomalous_magnetic" && c.coupling != "projected")
        fail(ErrorKind::config, "unknown coupling '" + c.coupling + "'");
    validate(c.make_coupling());
    if (c.surface != "sphere" && c.surface != "graph") fail(ErrorKind::config, "unknown surface '" + c.surface + "'");
    const bool needs_es = c.command == Command::symbol || c.command == Command::spectrum;
    if (needs_es) {
        if (c.coupling != "electro_scalar")
            fail(ErrorKind::unsupported, std::string(to_string(c.command)) + " needs an electro_scalar coupling");
        if (is_critical(ElectroScalar{c.eps, c.mu, c.eta}) && !c.critical)
            fail(ErrorKind::critical_coupling, "eps^2 - mu^2 - eta^2 = 4: pass --critical true to use the critical path");
    }
    if (c.n < 8) fail(ErrorKind::invalid_argument, "n must be at least 8");
    if (!(c.R > 0.0)) fail(ErrorKind::invalid_argument, "R must be positive");
    if (c.n_core < 4) fail(ErrorKind::invalid_argument, "n_core must be at least 4");
    if (c.nu < 0.0) fail(ErrorKind::invalid_argument, "nu must be nonnegative");
    if (c.command == Command::scan) {
        if (c.grid_count < 1) fail(ErrorKind::invalid_grid, "grid_count must be at least 1");
        const double lo = c.grid_lo.value_or(-c.m), hi = c.grid_hi.value_or(c.m);
        if (!(lo < hi) || lo < -c.m || hi > c.m) fail(ErrorKind::invalid_grid, "grid bounds must satisfy -m <= lo < hi <= m");
    }
    if (c.command == Command::confine) {
        if (c.z_im == 0.0) fail(ErrorKind::inadmissible_energy, "confine needs Im z != 0");
        if (c.surface != "sphere") fail(ErrorKind::unsupported, "confine needs a closed surface");
    }
    if (c.command == Command::identities && !(std::abs(c.a) < c.m))
        fail(ErrorKind::inadmissible_energy, "identities needs a in (-m, m)");
    if (c.probes < 1) fail(ErrorKind::invalid_argument, "probes must be positive");
    if (!(c.tol_factor > 0.0)) fail(ErrorKind::invalid_argument, "tol_factor must be positive");
    if (c.mesh_tol && !(*c.mesh_tol > 0.0)) fail(ErrorKind::invalid_argument, "mesh_tol must be positive");
}

// File values first, then flag overrides; `command` must be set by one of them.
inline RunConfig parse_config(const std::string& file_text, const std::vector<std::pair<std::string, std::string>>& overrides) {
    RunConfig c;
    bool have_command = false;
    auto apply = [&](const std::string& k, const std::string& v) {
        if (k == "schema_version") {
            if (detail::to_int(k, v) != kSchemaVersion) fail(ErrorKind::config, "unsupported schema_version " + v);
            return;
        }
        set_key(c, k, v);
        have_command |= k == "command";
    };
    for (const auto& [k, v] : parse_key_values(file_text)) apply(k, v);
    for (const auto& [k, v] : overrides) apply(k, v);
    if (!have_command) fail(ErrorKind::config, "missing command");
    validate(c);
    return c;
}

inline std::string read_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail(ErrorKind::io, "cannot read " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

} // namespace dshell
