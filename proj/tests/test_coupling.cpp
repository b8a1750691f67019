#include <catch2/catch_amalgamated.hpp>

#include "testutil.hpp"

using namespace mdsim;
using testutil::unit_grid;

namespace {

SimulationConfig small_five_spot(int n, double t_final) {
    SimulationConfig cfg;
    cfg.nx = cfg.ny = n;
    cfg.t_final = t_final;
    cfg.fluid.law = ViscosityLaw::constant;
    return cfg;
}

}  // namespace

TEST_CASE("picard map is idempotent for concentration-independent viscosity") {
    GridSpec g = unit_grid(16);
    MediumSpec med{ScalarField(g, 1.0), SymTensorField(g, 1.0, 0.0, 1.0)};
    med.validate();
    FluidSpec fl;
    fl.law = ViscosityLaw::constant;
    fl.validate();
    SourceSpec src = build_five_spot(g, 0.2, 0.125, 1.0);
    ScalarField u_old = testutil::random_field(g, 5, 0.1, 0.9);

    PicardContext ctx{med, fl, src, 0.01};
    auto [ps1, tr1] = picard_step(u_old, u_old, ctx);
    // Second application with the first result as the guess: the pressure no
    // longer depends on the guess, so the map must reproduce itself bitwise.
    auto [ps2, tr2] = picard_step(tr1.u_new, u_old, ctx);
    REQUIRE(tr1.u_new.v == tr2.u_new.v);
    REQUIRE(ps1.p.v == ps2.p.v);
}

TEST_CASE("picard residuals contract for an adverse mobility ratio") {
    GridSpec g = unit_grid(16);
    MediumSpec med{ScalarField(g, 1.0), SymTensorField(g, 1.0, 0.0, 1.0)};
    med.validate();
    FluidSpec fl;  // quarter-power, M = 20
    fl.validate();
    SourceSpec src = build_five_spot(g, 0.2, 0.125, 1.0);

    // Develop a nontrivial concentration profile first.
    SimulationConfig cfg = small_five_spot(16, 0.12);
    cfg.fluid = fl;
    SimulationHistory warm = run_simulation(cfg);
    ScalarField u_old = warm.u.back();

    PicardContext ctx{med, fl, src, 0.02};
    ScalarField guess = u_old;
    std::vector<double> residuals;
    for (int it = 0; it < 4; ++it) {
        auto [ps, tr] = picard_step(guess, u_old, ctx);
        residuals.push_back(detail::sup_diff(tr.u_new, guess));
        guess = tr.u_new;
    }
    REQUIRE(residuals[0] > 0.0);
    for (size_t k = 1; k < residuals.size(); ++k)
        REQUIRE(residuals[k] < residuals[k - 1]);
    REQUIRE(residuals.back() / residuals.front() < 0.1);
}

TEST_CASE("simulation history is aligned and conservative") {
    SimulationConfig cfg = small_five_spot(8, 0.1);
    SimulationHistory hist = run_simulation(cfg);

    REQUIRE(hist.times.size() >= 2);
    REQUIRE(hist.times.front() == 0.0);
    REQUIRE(hist.times.back() == Catch::Approx(0.1).margin(1e-12));
    REQUIRE(hist.u.size() == hist.times.size());
    REQUIRE(hist.p.size() == hist.times.size());
    REQUIRE(hist.v.size() == hist.times.size());
    REQUIRE(hist.mass.size() == hist.times.size());
    REQUIRE(hist.picard.size() == hist.times.size() - 1);
    REQUIRE(hist.balance.size() == hist.times.size() - 1);
    for (size_t s = 1; s < hist.times.size(); ++s) REQUIRE(hist.times[s] > hist.times[s - 1]);

    double injected = 0.0, produced = 0.0;
    for (size_t s = 0; s < hist.balance.size(); ++s) {
        const StepBalance& b = hist.balance[s];
        REQUIRE(b.identity_error_rel <= 1e-12);
        // mass series is consistent with the recorded per-step balance
        const double dm = hist.mass[s + 1] - hist.mass[s];
        REQUIRE(std::abs(dm - (b.injected - b.produced)) <=
                1e-11 * std::max(1.0, std::abs(hist.mass[s + 1])));
        injected += b.injected;
        produced += b.produced;
    }
    REQUIRE(hist.injected_total == Catch::Approx(injected));
    REQUIRE(hist.produced_total == Catch::Approx(produced));

    for (size_t s = 0; s < hist.times.size(); ++s) {
        REQUIRE(hist.min_u[s] >= -1e-12);
        REQUIRE(hist.max_u[s] <= 1.0 + 1e-12);
        REQUIRE(std::abs(hist.p[s].mean()) <= 1e-10);
    }
    for (const PicardState& pic : hist.picard) {
        REQUIRE(pic.converged);
        REQUIRE(pic.iterations <= 2);  // constant viscosity: map is exact after one pass
        REQUIRE(pic.k_trunc_active >= 1);
    }

    FieldHistory uh = hist.concentration_history();
    REQUIRE(uh.size() == hist.times.size());
    REQUIRE(uh.fields.back().v == hist.u.back().v);
}

TEST_CASE("source-free uniform state is a global equilibrium") {
    SimulationConfig cfg;
    cfg.nx = cfg.ny = 8;
    cfg.pattern = SourcePattern::none;
    cfg.u0 = 0.4;
    cfg.t_final = 0.2;
    cfg.dt_policy = DtPolicy::fixed;
    cfg.dt_value = 0.05;
    SimulationHistory hist = run_simulation(cfg);
    for (const ScalarField& u : hist.u)
        for (double x : u.v) REQUIRE(std::abs(x - 0.4) < 1e-12);
    for (const ScalarField& p : hist.p)
        for (double x : p.v) REQUIRE(x == 0.0);
    for (const FluxField& v : hist.v) {
        for (double f : v.fx) REQUIRE(f == 0.0);
        for (double f : v.fy) REQUIRE(f == 0.0);
    }
    for (double m : hist.mass) REQUIRE(m == Catch::Approx(0.4));
}

TEST_CASE("strict mode raises when the fixed-point cap is hit") {
    SimulationConfig cfg = small_five_spot(8, 0.05);
    cfg.fluid = FluidSpec{};  // quarter-power: genuinely nonlinear
    cfg.picard_tol = 1e-16;   // unreachably tight
    cfg.picard_max_iter = 1;
    cfg.strict_mode = true;
    REQUIRE_THROWS_AS(run_simulation(cfg), solver_error);

    cfg.strict_mode = false;
    SimulationHistory hist = run_simulation(cfg);
    bool any_unconverged = false;
    for (const PicardState& pic : hist.picard) any_unconverged |= !pic.converged;
    REQUIRE(any_unconverged);
}

TEST_CASE("repeated runs are bitwise identical") {
    SimulationConfig cfg = small_five_spot(8, 0.1);
    cfg.fluid = FluidSpec{};
    SimulationHistory a = run_simulation(cfg);
    SimulationHistory b = run_simulation(cfg);
    REQUIRE(a.times == b.times);
    REQUIRE(a.mass == b.mass);
    for (size_t s = 0; s < a.u.size(); ++s) {
        REQUIRE(a.u[s].v == b.u[s].v);
        REQUIRE(a.p[s].v == b.p[s].v);
    }
}

TEST_CASE("automatic truncation level stays inactive") {
    SimulationConfig cfg = small_five_spot(8, 0.05);
    cfg.rate = 2.0;  // push cell speeds well above 1 so a level of 1 truncates
    SimulationHistory autok = run_simulation(cfg);
    SimulationConfig big = cfg;
    big.k_trunc = 1000;  // far above any speed in this run
    SimulationHistory fixedk = run_simulation(big);
    REQUIRE(autok.u.back().v == fixedk.u.back().v);

    // A deliberately tiny level changes the dispersion and hence the answer.
    SimulationConfig low = cfg;
    low.k_trunc = 1;
    SimulationHistory lowk = run_simulation(low);
    double diff = 0.0;
    for (size_t c = 0; c < autok.u.back().v.size(); ++c)
        diff = std::max(diff, std::abs(autok.u.back().v[c] - lowk.u.back().v[c]));
    REQUIRE(diff > 0.0);
    for (const PicardState& pic : lowk.picard) REQUIRE(pic.k_trunc_active == 1);
}
