#include "dshell/run.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <ostream>

#include <json.hpp>

#include "dshell/boundary_ops.hpp"
#include "dshell/flat_symbol.hpp"
#include "dshell/spectral.hpp"

namespace dshell {

namespace {

using json = nlohmann::ordered_json;

json config_json(const RunConfig& c) {
    json j;
    for (const auto& [k, v] : parse_key_values(serialize(c)))
        if (k != "schema_version") j[k] = v;
    return j;
}

json header(const RunConfig& c) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["command"] = to_string(c.command);
    j["config"] = config_json(c);
    return j;
}

json mesh_json(const SurfaceMesh& m) {
    return {{"id", m.id}, {"nodes", m.size()}, {"h", m.h}, {"spacing", m.spacing}};
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) fail(ErrorKind::io, "cannot write " + path);
    return os;
}

void write_json(const RunConfig& c, const json& j) { open_out(c.out + ".json") << j.dump(2) << "\n"; }

std::string num(double v) { return detail::fmt_double(v); }

int run_symbol(const RunConfig& c, std::ostream& out) {
    const ElectroScalar k{c.eps, c.mu, c.eta};
    const auto spec = essential_spectrum(c.m, k, c.flat ? PointTag::eigenvalue_infinite_multiplicity : PointTag::embedded);
    const std::string text = to_text(spec);
    json j = header(c);
    j["sgn_kappa"] = sgn_kappa(k);
    j["critical"] = is_critical(k);
    j["spectrum"] = text;
    auto csv = open_out(c.out + ".csv");
    std::ostringstream extra;
    if (c.command == Command::symbol) {
        if (is_critical(k)) {
            j["embedded_point"] = -c.m * k.mu / k.eps;
            j["theta1_at_zero"] = theta1(0.0, c.m, k);
            csv << "xi_norm,theta1\n";
            for (int i = 0; i <= 100; ++i) csv << num(0.1 * i) << "," << num(theta1(0.1 * i, c.m, k)) << "\n";
        } else {
            const auto t = gap_thresholds(c.m, k);
            json th;
            if (t.a_plus) th["a_plus"] = *t.a_plus;
            if (t.a_minus) th["a_minus"] = *t.a_minus;
            if (t.a_star) th["a_star"] = *t.a_star;
            j["thresholds"] = th;
            extra << "thresholds:";
            if (t.a_star) extra << " a_star=" << num(*t.a_star);
            if (t.a_plus) extra << " a_plus=" << num(*t.a_plus) << " a_minus=" << num(*t.a_minus);
            extra << "\n";
            csv << "a,p_poly,sign_condition,in_spectrum\n";
            for (double a : uniform_gap_grid(c.m, std::max(c.grid_count, 1)))
                csv << num(a) << "," << num(p_poly(a, c.m, k)) << "," << int(sign_condition(a, c.m, k)) << ","
                    << int(spec.contains(a)) << "\n";
        }
    } else {
        csv << "kind,lo,hi,tag\n";
        for (auto& r : spec.rays) csv << "interval," << detail::format_number(r.lo) << "," << detail::format_number(r.hi) << ",\n";
        for (auto& p : spec.points) csv << "point," << num(p.value) << "," << num(p.value) << "," << to_string(p.tag) << "\n";
    }
    write_json(c, j);
    out << text << "\n" << extra.str();
    return 0;
}

int run_scan(const RunConfig& c, std::ostream& out) {
    const auto grid = uniform_gap_grid(c.m, c.grid_count, c.grid_lo, c.grid_hi);
    double amax = 0.0;
    for (double a : grid) amax = std::max(amax, std::abs(a));
    const auto mesh = build_mesh(c, amax);
    ScanOptions opt;
    opt.threshold_factor = c.tol_factor;
    opt.mesh_tol = c.mesh_tol;
    const auto rep = birman_schwinger_scan(mesh, c.m, c.make_coupling(), grid, opt);
    {
        auto csv = open_out(c.out + ".csv");
        write_scan_csv(rep, csv);
    }
    json j = header(c);
    j["mesh"] = mesh_json(mesh);
    j["coupling"] = rep.coupling;
    j["mesh_tol"] = rep.mesh_tol;
    j["threshold"] = c.tol_factor * rep.mesh_tol;
    json cands = json::array();
    for (auto& cd : rep.candidates) {
        cands.push_back({{"a", cd.a}, {"sigma", cd.sigma}, {"refined", cd.refined}});
        out << "candidate a=" << num(cd.a) << " sigma=" << num(cd.sigma) << (cd.refined ? "" : " (unrefined)") << "\n";
    }
    j["candidates"] = cands;
    write_json(c, j);
    out << rep.candidates.size() << " candidate(s)\n";
    return 0;
}

int run_confine(const RunConfig& c, std::ostream& out) {
    const auto mesh = build_mesh(c, 0.0);
    const auto rep = confinement_leakage(mesh, c.m, c.make_coupling(), cplx(c.z_re, c.z_im));
    {
        auto csv = open_out(c.out + ".csv");
        csv << "probe,x,y,z,field_norm,free_norm\n";
        for (std::size_t i = 0; i < rep.probe_points.size(); ++i) {
            const auto& x = rep.probe_points[i];
            csv << i << "," << num(x[0]) << "," << num(x[1]) << "," << num(x[2]) << "," << num(rep.field_norm[i]) << ","
                << num(rep.free_norm[i]) << "\n";
        }
    }
    json j = header(c);
    j["mesh"] = mesh_json(mesh);
    j["leakage_ratio"] = rep.ratio;
    j["max_field"] = rep.max_field;
    j["max_free"] = rep.max_free;
    j["probes"] = rep.probes;
    write_json(c, j);
    out << "leakage_ratio=" << num(rep.ratio) << "\n";
    return 0;
}

int run_identities(const RunConfig& c, std::ostream& out) {
    const auto mesh = build_mesh(c, std::abs(c.a));
    const auto rep = operator_identities(mesh, c.a, c.m, c.make_coupling(), c.probes);
    const double tol = c.mesh_tol.value_or(rep.mesh_tol);
    struct Row {
        std::string name;
        double value, limit;
    };
    std::vector<Row> rows{{"psi_relation", rep.psi_relation, tol},
                          {"gamma5_relation", rep.gamma5_relation, tol},
                          {"squared_identity", rep.squared_identity, tol}};
    if (rep.product_expansion) rows.push_back({"product_expansion", *rep.product_expansion, 1e-12});
    // Hermiticity needs equal quadrature weights.
    if (mesh.equal_weights()) {
        rows.push_back({"hermiticity_cauchy", rep.hermiticity_cauchy, 1e-12});
        if (rep.hermiticity_lambda_plus) rows.push_back({"hermiticity_lambda_plus", *rep.hermiticity_lambda_plus, 1e-12});
        if (rep.hermiticity_lambda_minus) rows.push_back({"hermiticity_lambda_minus", *rep.hermiticity_lambda_minus, 1e-12});
    }
    bool ok = true;
    json j = header(c);
    j["mesh"] = mesh_json(mesh);
    j["mesh_tol"] = tol;
    json res;
    auto csv = open_out(c.out + ".csv");
    csv << "name,value,limit,pass\n";
    for (auto& r : rows) {
        const bool pass = r.value <= r.limit;
        ok &= pass;
        res[r.name] = {{"value", r.value}, {"limit", r.limit}, {"pass", pass}};
        csv << r.name << "," << num(r.value) << "," << num(r.limit) << "," << int(pass) << "\n";
        out << (pass ? "PASS " : "FAIL ") << r.name << " " << num(r.value) << " <= " << num(r.limit) << "\n";
    }
    j["residuals"] = res;
    j["pass"] = ok;
    write_json(c, j);
    return ok ? 0 : 1;
}

} // namespace

SurfaceMesh build_mesh(const RunConfig& c, double a_max) {
    if (c.surface == "sphere") return make_sphere(c.R, std::size_t(c.n));
    const BumpProfile bump{c.bump_radius, c.bump_amplitude};
    const double rt = c.r_trunc.value_or(default_truncation_radius(c.bump_radius, c.m, a_max));
    return make_graph(c.nu, bump, std::size_t(c.n_core), rt);
}

int run(const RunConfig& cfg, std::ostream& out) {
    validate(cfg);
    switch (cfg.command) {
    case Command::symbol:
    case Command::spectrum: return run_symbol(cfg, out);
    case Command::scan: return run_scan(cfg, out);
    case Command::confine: return run_confine(cfg, out);
    case Command::identities: return run_identities(cfg, out);
    }
    return 0;
}

} // namespace dshell
