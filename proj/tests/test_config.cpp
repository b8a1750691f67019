#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>

#include "mdsim/config.hpp"
#include "mdsim/snapshot.hpp"
#include "testutil.hpp"

using namespace mdsim;
using Catch::Matchers::ContainsSubstring;

namespace {

SimulationConfig parse_text(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

std::string cfg_dir() {
    auto dir = std::filesystem::temp_directory_path() / "mdsim_config_tests";
    std::filesystem::create_directories(dir);
    return dir.string();
}

}  // namespace

TEST_CASE("config defaults cover an unconfigured run") {
    const SimulationConfig c = parse_text("");

    REQUIRE(c.nx == 32);
    REQUIRE(c.ny == 32);
    REQUIRE(c.grid().h == 1.0 / 32);
    REQUIRE(c.porosity == 1.0);
    REQUIRE(c.fluid.law == ViscosityLaw::quarter_power);
    REQUIRE(c.fluid.mobility_ratio == 20.0);
    REQUIRE(c.fluid.c1 == 0.99 / 20.0);  // auto-filled by validate()
    REQUIRE(c.pattern == SourcePattern::five_spot);
    REQUIRE(c.rate == 0.2);
    REQUIRE(c.dt_policy == DtPolicy::cfl);
    REQUIRE(c.dt_value == 1.0);
    REQUIRE(c.t_final == 0.5);
    REQUIRE_FALSE(c.k_trunc.has_value());
    REQUIRE_FALSE(c.lag_cross_picard);
    REQUIRE(c.ell_list == std::vector<double>{2.0, 4.0});
    REQUIRE(c.theta1 == 2.0);
    REQUIRE(c.theta3 == 1.5);
    REQUIRE(c.seed == 1234u);
    REQUIRE_FALSE(c.strict_mode);
}

TEST_CASE("every config key parses and lands in its slot") {
    const SimulationConfig c = parse_text(
        "# exhaustive key coverage\n"
        "grid.nx = 24\n"
        "grid.ny = 20\n"
        "grid.h = 0.05   # spacing wins over 1/nx\n"
        "\n"
        "medium.porosity = 0.3\n"
        "medium.lambda0 = 0.002\n"
        "medium.c0 = 1e-5\n"
        "medium.k_xx = 2.0\n"
        "medium.k_xy = 0.1\n"
        "medium.k_yy = 1.5\n"
        "fluid.m = 0.01\n"
        "fluid.a = 0.02\n"
        "fluid.b = 0.05\n"
        "fluid.viscosity_law = constant\n"
        "fluid.mu0 = 2.0\n"
        "fluid.mobility_ratio = 10\n"
        "fluid.c1 = 0.15\n"
        "sources.pattern = five_spot\n"
        "sources.rate = 0.4\n"
        "sources.block_fraction = 0.25\n"
        "sources.u_hat = 0.9\n"
        "time.dt_policy = fixed:0.025\n"
        "time.t_final = 1.5\n"
        "time.snapshot_every = 4\n"
        "init.u0 = 0.2\n"
        "solver.pressure_tol = 1e-9\n"
        "solver.transport_tol = 1e-13\n"
        "solver.picard_tol = 1e-7\n"
        "solver.pressure_max_iter = 1000\n"
        "solver.transport_max_iter = 500\n"
        "solver.picard_max_iter = 20\n"
        "solver.k_trunc = 3\n"
        "solver.lag_cross_picard = 1\n"
        "diagnostics.s = 4\n"
        "diagnostics.s1 = 2\n"
        "diagnostics.ell = 2.5,3.5,8\n"
        "diagnostics.theta1 = 1.5\n"
        "diagnostics.theta2_factor = 0.2\n"
        "diagnostics.theta3 = 1.2\n"
        "seed = 42\n"
        "strict = 1\n");

    REQUIRE(c.nx == 24);
    REQUIRE(c.ny == 20);
    REQUIRE(c.h == 0.05);
    REQUIRE(c.grid().h == 0.05);
    REQUIRE(c.porosity == 0.3);
    REQUIRE(c.lambda0 == 0.002);
    REQUIRE(c.c0 == 1e-5);
    REQUIRE(c.k_xx == 2.0);
    REQUIRE(c.k_xy == 0.1);
    REQUIRE(c.k_yy == 1.5);
    REQUIRE(c.fluid.m == 0.01);
    REQUIRE(c.fluid.a == 0.02);
    REQUIRE(c.fluid.b == 0.05);
    REQUIRE(c.fluid.law == ViscosityLaw::constant);
    REQUIRE(c.fluid.mu0 == 2.0);
    REQUIRE(c.fluid.mobility_ratio == 10.0);
    REQUIRE(c.fluid.c1 == 0.15);  // explicit bound survives validate()
    REQUIRE(c.rate == 0.4);
    REQUIRE(c.block_fraction == 0.25);
    REQUIRE(c.u_hat == 0.9);
    REQUIRE(c.dt_policy == DtPolicy::fixed);
    REQUIRE(c.dt_value == 0.025);
    REQUIRE(c.t_final == 1.5);
    REQUIRE(c.snapshot_every == 4);
    REQUIRE(c.u0 == 0.2);
    REQUIRE(c.pressure_tol == 1e-9);
    REQUIRE(c.transport_tol == 1e-13);
    REQUIRE(c.picard_tol == 1e-7);
    REQUIRE(c.pressure_max_iter == 1000);
    REQUIRE(c.transport_max_iter == 500);
    REQUIRE(c.picard_max_iter == 20);
    REQUIRE(c.k_trunc.has_value());
    REQUIRE(*c.k_trunc == 3);
    REQUIRE(c.lag_cross_picard);
    REQUIRE(c.s_exponent == 4.0);
    REQUIRE(c.s1_level == 2.0);
    REQUIRE(c.ell_list == std::vector<double>{2.5, 3.5, 8.0});
    REQUIRE(c.theta1 == 1.5);
    REQUIRE(c.theta2_factor == 0.2);
    REQUIRE(c.theta3 == 1.2);
    REQUIRE(c.seed == 42u);
    REQUIRE(c.strict_mode);
}

TEST_CASE("dt policy strings parse both shapes") {
    REQUIRE(parse_text("time.dt_policy = cfl\n").dt_value == 1.0);
    REQUIRE(parse_text("time.dt_policy = cfl:0.5\n").dt_value == 0.5);
    const SimulationConfig c = parse_text("time.dt_policy = fixed:0.01\n");
    REQUIRE(c.dt_policy == DtPolicy::fixed);
    REQUIRE(c.dt_value == 0.01);
}

TEST_CASE("malformed config lines and bad values are rejected") {
    SECTION("unknown key") {
        REQUIRE_THROWS_WITH(parse_text("grid.nz = 4\n"),
                            ContainsSubstring("unknown config key 'grid.nz'"));
    }
    SECTION("missing equals sign") {
        REQUIRE_THROWS_WITH(parse_text("grid.nx 16\n"), ContainsSubstring("expected 'key = value'"));
    }
    SECTION("missing value") {
        REQUIRE_THROWS_WITH(parse_text("grid.nx =\n"), ContainsSubstring("missing value"));
    }
    SECTION("comment swallows the value") {
        REQUIRE_THROWS_WITH(parse_text("grid.nx = # sixteen\n"),
                            ContainsSubstring("missing value"));
    }
    SECTION("non-numeric number") {
        REQUIRE_THROWS_WITH(parse_text("sources.rate = fast\n"),
                            ContainsSubstring("non-numeric"));
    }
    SECTION("fractional integer") {
        REQUIRE_THROWS_WITH(parse_text("grid.nx = 4.5\n"), ContainsSubstring("must be an integer"));
    }
    SECTION("grid too small") {
        REQUIRE_THROWS_WITH(parse_text("grid.nx = 2\n"), ContainsSubstring("at least 3x3"));
    }
    SECTION("unknown viscosity law") {
        REQUIRE_THROWS_AS(parse_text("fluid.viscosity_law = cubic\n"), config_error);
    }
    SECTION("unknown source pattern") {
        REQUIRE_THROWS_AS(parse_text("sources.pattern = nine_spot\n"), config_error);
    }
    SECTION("unknown dt policy") {
        REQUIRE_THROWS_AS(parse_text("time.dt_policy = euler:0.1\n"), config_error);
    }
    SECTION("nonpositive dt parameter") {
        REQUIRE_THROWS_WITH(parse_text("time.dt_policy = fixed:0\n"),
                            ContainsSubstring("positive parameter"));
    }
    SECTION("snapshot cadence below one") {
        REQUIRE_THROWS_AS(parse_text("time.snapshot_every = 0\n"), config_error);
    }
    SECTION("negative rate") {
        REQUIRE_THROWS_AS(parse_text("sources.rate = -1\n"), config_error);
    }
    SECTION("block fraction out of range") {
        REQUIRE_THROWS_AS(parse_text("sources.block_fraction = 0.6\n"), config_error);
        REQUIRE_THROWS_AS(parse_text("sources.block_fraction = 0\n"), config_error);
    }
    SECTION("injected concentration out of range") {
        REQUIRE_THROWS_AS(parse_text("sources.u_hat = 1.5\n"), config_error);
    }
    SECTION("initial concentration out of range") {
        REQUIRE_THROWS_AS(parse_text("init.u0 = -0.1\n"), config_error);
    }
    SECTION("zero truncation level") {
        REQUIRE_THROWS_WITH(parse_text("solver.k_trunc = 0\n"),
                            ContainsSubstring("'auto' or a positive integer"));
    }
    SECTION("oscillation exponent too small") {
        REQUIRE_THROWS_WITH(parse_text("diagnostics.s = 2\n"), ContainsSubstring("must exceed 2"));
    }
    SECTION("level threshold below one") {
        REQUIRE_THROWS_AS(parse_text("diagnostics.s1 = 0.5\n"), config_error);
    }
    SECTION("ladder scale at or below one") {
        REQUIRE_THROWS_WITH(parse_text("diagnostics.ell = 2,1\n"),
                            ContainsSubstring("must exceed 1"));
    }
}

TEST_CASE("five-spot sources sit in opposite corners and balance exactly") {
    const GridSpec g = testutil::unit_grid(32);
    const SourceSpec s = build_five_spot(g, 0.2, 0.125, 1.0);

    // 0.125 * 32 = 4 cells per side, density = rate / (16 h^2) = 12.8
    REQUIRE(s.q_inject.at(0, 0) == 12.8);
    REQUIRE(s.q_inject.at(3, 3) == 12.8);
    REQUIRE(s.q_inject.at(4, 0) == 0.0);
    REQUIRE(s.q_inject.at(0, 4) == 0.0);
    REQUIRE(s.q_produce.at(31, 31) == 12.8);
    REQUIRE(s.q_produce.at(28, 28) == 12.8);
    REQUIRE(s.q_produce.at(27, 31) == 0.0);
    REQUIRE(s.q_produce.at(0, 0) == 0.0);
    REQUIRE(s.q_inject.integral() == Catch::Approx(0.2).epsilon(1e-14));
    REQUIRE(s.q_inject.integral() == s.q_produce.integral());

    // a grid too coarse for the fraction still gets one source cell
    const GridSpec tiny = testutil::unit_grid(4);
    const SourceSpec t = build_five_spot(tiny, 0.2, 0.125, 1.0);
    REQUIRE(t.q_inject.at(0, 0) == 0.2 * 16.0);
    REQUIRE(t.q_inject.integral() == Catch::Approx(0.2));
}

TEST_CASE("source building projects without disturbing balanced patterns") {
    SimulationConfig c = parse_text("grid.nx = 16\ngrid.ny = 16\n");
    const SourceSpec direct = build_five_spot(c.grid(), c.rate, c.block_fraction, c.u_hat);
    const SourceSpec built = build_sources(c);
    // both corner blocks carry identical partial sums, so the compatibility
    // scaling factor is exactly 1 and the projection is a bitwise no-op
    REQUIRE(built.q_inject.v == direct.q_inject.v);
    REQUIRE(built.q_produce.v == direct.q_produce.v);

    c.pattern = SourcePattern::none;
    const SourceSpec off = build_sources(c);
    for (double q : off.q_inject.v) REQUIRE(q == 0.0);
    for (double q : off.q_produce.v) REQUIRE(q == 0.0);
}

TEST_CASE("initial concentration loads from snapshots and checks its range") {
    const std::string dir = cfg_dir();
    const GridSpec g = testutil::unit_grid(16);

    SimulationConfig c = parse_text("grid.nx = 16\ngrid.ny = 16\ninit.u0 = 0.4\n");
    ScalarField uniform = build_initial_concentration(c);
    for (double u : uniform.v) REQUIRE(u == 0.4);

    ScalarField stored = testutil::random_field(g, 7, 0.0, 1.0);
    const std::string ok_file = dir + "/u0_ok.snap";
    write_snapshot(stored, "u0", 0.0, ok_file);
    c.u0_file = ok_file;
    REQUIRE(build_initial_concentration(c).v == stored.v);

    ScalarField hot = stored;
    hot[5] = 1.5;
    const std::string hot_file = dir + "/u0_hot.snap";
    write_snapshot(hot, "u0", 0.0, hot_file);
    c.u0_file = hot_file;
    REQUIRE_THROWS_WITH(build_initial_concentration(c),
                        ContainsSubstring("must lie in [0, 1]"));

    write_snapshot(ScalarField(testutil::unit_grid(8), 0.5), "u0", 0.0, dir + "/u0_small.snap");
    c.u0_file = dir + "/u0_small.snap";
    REQUIRE_THROWS_WITH(build_initial_concentration(c),
                        ContainsSubstring("does not match the configured grid"));
}

TEST_CASE("medium fields can come from snapshot files") {
    const std::string dir = cfg_dir();
    const GridSpec g = testutil::unit_grid(12);
    ScalarField phi = testutil::random_field(g, 21, 0.2, 0.4);
    const std::string phi_file = dir + "/phi.snap";
    write_snapshot(phi, "porosity", 0.0, phi_file);

    SimulationConfig c = parse_text("grid.nx = 12\ngrid.ny = 12\n");
    c.porosity_file = phi_file;
    const MediumSpec medium = build_medium(c);
    REQUIRE(medium.porosity.v == phi.v);
    REQUIRE(medium.permeability.xx[0] == 1.0);
}

TEST_CASE("missing config file is reported by name") {
    REQUIRE_THROWS_WITH(load_config("/nonexistent/path/run.cfg"),
                        ContainsSubstring("cannot open config file"));
}
