#include <catch2/catch_amalgamated.hpp>

#include "testutil.hpp"

using namespace mdsim;
using testutil::unit_grid;

namespace {

ScalarField quadratic_x(const GridSpec& g) {
    ScalarField f(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) f.at(i, j) = g.cx(i) * g.cx(i);
    return f;
}

double gradient_error(int n) {
    GridSpec g = testutil::unit_grid(n);
    ScalarField f(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            f.at(i, j) = std::sin(mms::kPi * g.cx(i)) * std::cos(mms::kPi * g.cy(j));
    GradientField grad = gradient(f);
    double worst = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double ex = mms::kPi * std::cos(mms::kPi * g.cx(i)) *
                              std::cos(mms::kPi * g.cy(j));
            const double ey = -mms::kPi * std::sin(mms::kPi * g.cx(i)) *
                              std::sin(mms::kPi * g.cy(j));
            worst = std::max(worst, std::abs(grad.gx.at(i, j) - ex));
            worst = std::max(worst, std::abs(grad.gy.at(i, j) - ey));
        }
    return worst;
}

}  // namespace

TEST_CASE("gradient stencils are exact on quadratics") {
    GridSpec g = unit_grid(12);
    ScalarField f = quadratic_x(g);
    GradientField grad = gradient(f);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            REQUIRE(std::abs(grad.gx.at(i, j) - 2.0 * g.cx(i)) < 1e-12);
            REQUIRE(std::abs(grad.gy.at(i, j)) < 1e-12);
        }
}

TEST_CASE("gradient converges at second order including the one-sided edges") {
    const double e32 = gradient_error(32);
    const double e64 = gradient_error(64);
    REQUIRE(e64 <= 12.0 / (64.0 * 64.0));
    const double ratio = e32 / e64;
    REQUIRE(ratio > 3.5);
    REQUIRE(ratio < 4.5);
}

TEST_CASE("divergence of interior-sampled linear flux is constant") {
    GridSpec g = unit_grid(16);
    FluxField F(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i) F.x_face(i, j) = i * g.h;  // F = (x, y), interior faces only
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) F.y_face(i, j) = j * g.h;
    ScalarField d = divergence(F);
    for (int j = 1; j < g.ny - 1; ++j)
        for (int i = 1; i < g.nx - 1; ++i) REQUIRE(std::abs(d.at(i, j) - 2.0) < 1e-12);
}

TEST_CASE("divergence demands exactly zero boundary fluxes") {
    GridSpec g = unit_grid(8);
    FluxField F(g);
    F.x_face(0, 3) = 1e-14;
    REQUIRE_THROWS_AS(divergence(F), config_error);
}

TEST_CASE("divergence of a stream-function field telescopes to zero") {
    GridSpec g = unit_grid(16);
    FluxField F = testutil::random_stream_flux(g, 99, 3.0);
    REQUIRE(F.boundary_fluxes_zero());
    ScalarField d = divergence(F);
    for (double x : d.v) REQUIRE(std::abs(x) < 1e-11);
}

TEST_CASE("ball average is mean of member cells and shifts exactly with constants") {
    GridSpec g = unit_grid(16);
    ScalarField f = testutil::random_field(g, 7, -1.0, 1.0);
    Ball b = make_ball(g, 8, 8, 0.2);
    double s = 0.0;
    for (int c : b.cells) s += f[c];
    REQUIRE(ball_average(f, b) == s / static_cast<double>(b.cells.size()));

    ScalarField shifted = f;
    for (double& x : shifted.v) x += 0.37;
    REQUIRE(std::abs(ball_average(shifted, b) - (ball_average(f, b) + 0.37)) < 1e-13);
}

TEST_CASE("ball average refuses an empty ball") {
    GridSpec g = unit_grid(8);
    ScalarField f(g, 1.0);
    Ball empty;  // hand-built: make_ball always contains at least the center
    REQUIRE_THROWS_AS(ball_average(f, empty), resolution_error);
}

TEST_CASE("cylinder restriction picks the expected snapshot window") {
    GridSpec g = unit_grid(16);
    FieldHistory hist;
    for (int k = 0; k <= 20; ++k) hist.push(0.01 * k, ScalarField(g, static_cast<double>(k)));

    // r = 0.2: time window (0.085, 0.125] around t0 = 0.105 -> snapshots 9..12.
    Cylinder q{make_ball(g, 8, 8, 0.2), 0.105};
    auto samples = cylinder_restrict(hist, q);
    REQUIRE(samples.size() == 4 * q.ball.cells.size());
    for (const auto& smp : samples) {
        REQUIRE(smp.time > q.t_lo());
        REQUIRE(smp.time <= q.t_hi());
        REQUIRE(smp.value >= 9.0);
        REQUIRE(smp.value <= 12.0);
    }
}

TEST_CASE("cylinder restriction: single-cell single-snapshot limit") {
    GridSpec g = unit_grid(16);
    FieldHistory hist;
    hist.push(0.0, ScalarField(g, 5.0));
    Cylinder q{make_ball(g, 3, 11, 0.5 * g.h), 0.0};
    REQUIRE(q.ball.cells.size() == 1);
    auto samples = cylinder_restrict(hist, q);
    REQUIRE(samples.size() == 1);
    REQUIRE(samples[0].cell == g.lin(3, 11));
    REQUIRE(samples[0].value == 5.0);
}

TEST_CASE("cylinder restriction covers everything when the cylinder does") {
    GridSpec g = unit_grid(8);
    FieldHistory hist;
    hist.push(0.25, ScalarField(g, 1.0));
    hist.push(0.5, ScalarField(g, 2.0));
    hist.push(0.75, ScalarField(g, 3.0));
    Cylinder q{make_ball(g, 4, 4, g.diameter()), 0.5};
    REQUIRE(q.ball.cells.size() == static_cast<size_t>(g.cell_count()));
    REQUIRE(cylinder_restrict(hist, q).size() == 3u * g.cell_count());
}

TEST_CASE("cylinder restriction with an empty time window throws") {
    GridSpec g = unit_grid(16);
    FieldHistory hist;
    hist.push(1.0, ScalarField(g, 1.0));
    Cylinder q{make_ball(g, 8, 8, 0.1), 0.0};  // window around t = 0, snapshot at t = 1
    REQUIRE_THROWS_AS(cylinder_restrict(hist, q), resolution_error);
}
