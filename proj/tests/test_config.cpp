#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "dshell/config.hpp"
#include "dshell/run.hpp"

using namespace dshell;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind;
    }
    return ErrorKind(0);
}

std::string slurp(const std::string& path) {
    std::ifstream is(path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string tmp_prefix(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("dshell_test_" + name)).string();
}

} // namespace

TEST(Config, MinimalFlags) {
    const auto c = parse_config("", {{"command", "symbol"}, {"eps", "3"}, {"mu", "1"}});
    EXPECT_EQ(c.command, Command::symbol);
    EXPECT_EQ(c.eps, 3.0);
    EXPECT_EQ(c.m, 1.0);
    EXPECT_EQ(c.n, 512);
}

TEST(Config, FlagsOverrideFile) {
    const auto c = parse_config("command=scan\n# comment\nn = 64  # trailing\nmu=0.5\n", {{"n", "128"}});
    EXPECT_EQ(c.command, Command::scan);
    EXPECT_EQ(c.n, 128);
    EXPECT_EQ(c.mu, 0.5);
}

TEST(Config, Errors) {
    EXPECT_EQ(kind_of([] { parse_config("", {{"eps", "1"}}); }), ErrorKind::config);
    EXPECT_EQ(kind_of([] { parse_config("command=symbol\nbogus=1\n", {}); }), ErrorKind::config);
    EXPECT_EQ(kind_of([] { parse_config("command=symbol\nnot a pair\n", {}); }), ErrorKind::config);
    EXPECT_EQ(kind_of([] { parse_config("", {{"command", "symbol"}, {"eps", "x"}}); }), ErrorKind::config);
    EXPECT_EQ(kind_of([] { parse_config("", {{"command", "fly"}}); }), ErrorKind::config);
    EXPECT_EQ(kind_of([] { parse_config("schema_version=7\ncommand=symbol\n", {}); }), ErrorKind::config);
    // sgn = 0 is not a valid coupling
    EXPECT_EQ(kind_of([] { parse_config("", {{"command", "symbol"}, {"eps", "1"}, {"mu", "1"}}); }),
              ErrorKind::invalid_coupling);
    // critical couplings need the explicit flag
    EXPECT_EQ(kind_of([] { parse_config("", {{"command", "symbol"}, {"eps", "2.5"}, {"mu", "1.5"}}); }),
              ErrorKind::critical_coupling);
    EXPECT_NO_THROW(parse_config("", {{"command", "symbol"}, {"eps", "2.5"}, {"mu", "1.5"}, {"critical", "true"}}));
    EXPECT_EQ(kind_of([] { parse_config("", {{"command", "scan"}, {"eps", "1"}, {"grid_count", "0"}}); }),
              ErrorKind::invalid_grid);
    EXPECT_EQ(kind_of([] { parse_config("", {{"command", "scan"}, {"eps", "1"}, {"grid_lo", "0.5"}, {"grid_hi", "0.1"}}); }),
              ErrorKind::invalid_grid);
    EXPECT_EQ(kind_of([] { parse_config("", {{"command", "confine"}, {"mu", "-2"}, {"z_im", "0"}}); }),
              ErrorKind::inadmissible_energy);
    EXPECT_EQ(kind_of([] { parse_config("", {{"command", "spectrum"}, {"coupling", "anomalous_magnetic"}, {"upsilon", "2"}}); }),
              ErrorKind::unsupported);
    EXPECT_EQ(kind_of([] { read_file("/nonexistent/config.txt"); }), ErrorKind::io);
}

TEST(Config, SerializeRoundTrip) {
    RunConfig c = parse_config("", {{"command", "confine"}, {"coupling", "anomalous_magnetic"}, {"upsilon", "2"},
                                    {"r_trunc", "5.5"}, {"grid_lo", "-0.3"}, {"n", "100"}, {"z_im", "0.25"},
                                    {"mesh_tol", "0.125"}, {"out", "foo/bar"}, {"m", "0.1"}});
    EXPECT_EQ(parse_config(serialize(c), {}), c);
    const RunConfig d = parse_config("", {{"command", "symbol"}, {"eps", "3"}});
    EXPECT_EQ(parse_config(serialize(d), {}), d);
    EXPECT_NE(serialize(d).find("schema_version=1"), std::string::npos);
}

TEST(Config, SymbolRunPrintsWholeLine) {
    auto c = parse_config("", {{"command", "symbol"}, {"eps", "0"}, {"mu", "-2"}, {"out", tmp_prefix("sym")}});
    std::ostringstream os;
    EXPECT_EQ(run(c, os), 0);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "R");
    const std::string js = slurp(c.out + ".json");
    EXPECT_NE(js.find("\"schema_version\": 1"), std::string::npos);
    EXPECT_NE(js.find("\"spectrum\": \"R\""), std::string::npos);
}

TEST(Config, SpectrumRunCritical) {
    auto c = parse_config("", {{"command", "spectrum"}, {"eps", "2.5"}, {"mu", "1.5"}, {"critical", "true"},
                               {"out", tmp_prefix("spec")}});
    std::ostringstream os;
    EXPECT_EQ(run(c, os), 0);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "(-inf,-1] U {-0.6:embedded} U [1,inf)");
    const std::string csv = slurp(c.out + ".csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "kind,lo,hi,tag");
    EXPECT_NE(csv.find("point,-0.6,-0.6,embedded"), std::string::npos);
}

TEST(Config, ScanOutputIsDeterministic) {
    std::string first;
    for (int rep = 0; rep < 2; ++rep) {
        auto c = parse_config("", {{"command", "scan"}, {"eps", "1"}, {"n", "40"}, {"grid_count", "6"},
                                   {"out", tmp_prefix("scan" + std::to_string(rep))}});
        std::ostringstream os;
        EXPECT_EQ(run(c, os), 0);
        const std::string csv = slurp(c.out + ".csv");
        EXPECT_EQ(csv.substr(0, csv.find('\n')), "a,sigma_min,candidate_flag");
        if (rep == 0)
            first = csv;
        else
            EXPECT_EQ(csv, first);
    }
}

TEST(Config, IdentitiesRunWritesTable) {
    auto c = parse_config("", {{"command", "identities"}, {"eps", "1.3"}, {"mu", "0.4"}, {"n", "128"}, {"a", "0.2"},
                               {"probes", "2"}, {"out", tmp_prefix("ids")}});
    std::ostringstream os;
    const int code = run(c, os);
    const std::string csv = slurp(c.out + ".csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "name,value,limit,pass");
    EXPECT_EQ(code, os.str().find("FAIL") == std::string::npos ? 0 : 1);
    EXPECT_NE(os.str().find("PASS"), std::string::npos);
}

TEST(Config, BuildMesh) {
    auto c = parse_config("", {{"command", "scan"}, {"eps", "1"}, {"surface", "graph"}, {"n_core", "100"},
                               {"nu", "0.5"}});
    const auto g = build_mesh(c, 0.5);
    EXPECT_EQ(g.kind, SurfaceKind::graph);
    EXPECT_NEAR(g.r_trunc, default_truncation_radius(1.0, 1.0, 0.5), 1e-15);
    c.surface = "sphere";
    c.n = 50;
    EXPECT_EQ(build_mesh(c, 0.0).size(), 50u);
}
