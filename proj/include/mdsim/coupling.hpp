#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mdsim/config.hpp"
#include "mdsim/errors.hpp"
#include "mdsim/field.hpp"
#include "mdsim/pressure.hpp"
#include "mdsim/transport.hpp"

namespace mdsim {

/// One time step's fixed-point iteration record.
struct PicardState {
    std::vector<double> residuals;          // sup-norm gaps between consecutive iterates
    std::vector<double> contraction_ratios;  // consecutive residual ratios
    int k_trunc_active = 0;
    int iterations = 0;
    bool converged = false;
};

struct StepBalance {
    double identity_error_rel = 0.0;  // per-step discrete balance defect, relative
    double injected = 0.0;            // dt * integral of q_I u_hat
    double produced = 0.0;            // dt * integral of q_P u_new
};

struct SimulationHistory {
    std::vector<double> times;  // includes t = 0
    std::vector<ScalarField> u;
    std::vector<ScalarField> p;
    std::vector<FluxField> v;
    std::vector<PicardState> picard;        // one per step
    std::vector<StepBalance> balance;       // one per step
    std::vector<double> mass;               // integral of porosity * u, per snapshot
    std::vector<double> min_u, max_u;       // per snapshot
    double injected_total = 0.0;
    double produced_total = 0.0;

    FieldHistory concentration_history() const {
        FieldHistory h;
        for (size_t s = 0; s < times.size(); ++s) h.push(times[s], u[s]);
        return h;
    }
    FieldHistory pressure_history() const {
        FieldHistory h;
        for (size_t s = 0; s < times.size(); ++s) h.push(times[s], p[s]);
        return h;
    }
};

struct PicardContext {
    const MediumSpec& medium;
    const FluidSpec& fluid;
    const SourceSpec& sources;
    double dt;
    double pressure_tol = 1e-10;
    double transport_tol = 1e-14;
    int pressure_max_iter = 50000;
    int transport_max_iter = 5000;
    std::optional<int> k_trunc;   // absent = auto (choose k that keeps truncation inactive)
    bool lag_cross_picard = false;
};

/// One application of the fixed-point map: pressure and Darcy velocity from
/// the current guess, then one implicit transport step from the step-initial
/// state using that velocity.
inline std::pair<PressureSolution, TransportStepReport> picard_step(const ScalarField& u_guess,
                                                                    const ScalarField& u_old,
                                                                    const PicardContext& ctx) {
    PressureSolution ps = solve_pressure(u_guess, ctx.medium, ctx.fluid, ctx.sources,
                                         ctx.pressure_tol, ctx.pressure_max_iter);
    TransportOptions topt;
    topt.tol = ctx.transport_tol;
    topt.max_iter = ctx.transport_max_iter;
    topt.k_trunc = ctx.k_trunc
                       ? ctx.k_trunc
                       : std::optional<int>(std::max(
                             1, static_cast<int>(std::ceil(ps.v.max_cell_speed()))));
    if (ctx.lag_cross_picard) topt.cross_state = &u_guess;
    TransportStepReport tr =
        advance_concentration(u_old, ps.v, ctx.medium, ctx.fluid, ctx.sources, ctx.dt, topt);
    return {std::move(ps), std::move(tr)};
}

namespace detail {

inline double sup_diff(const ScalarField& a, const ScalarField& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
    return m;
}

inline StepBalance step_balance(const TransportStepReport& rep, const SourceSpec& sources) {
    const GridSpec& g = rep.u_new.grid;
    const double cell = g.h * g.h;
    double inj = 0.0, prod = 0.0;
    for (int c = 0; c < g.cell_count(); ++c) {
        inj += sources.q_inject[c] * sources.u_hat[c];
        prod += sources.q_produce[c] * rep.u_new[c];
    }
    inj *= cell * rep.dt;
    prod *= cell * rep.dt;
    StepBalance b;
    b.injected = inj;
    b.produced = prod;
    const double defect = rep.mass_after - rep.mass_before - (inj - prod);
    const double scale = std::max({std::abs(rep.mass_before), std::abs(rep.mass_after),
                                   std::abs(inj), std::abs(prod)});
    b.identity_error_rel = scale > 0.0 ? std::abs(defect) / scale : (defect == 0.0 ? 0.0 : 1.0);
    return b;
}

}  // namespace detail

/// Sequentially coupled time loop: each step iterates the fixed-point map on
/// the concentration until the sup-norm gap between consecutive iterates
/// falls below the configured tolerance.
inline SimulationHistory run_simulation(const SimulationConfig& cfg) {
    const MediumSpec medium = build_medium(cfg);
    FluidSpec fluid = cfg.fluid;
    fluid.validate();
    const SourceSpec sources = build_sources(cfg);
    ScalarField u_cur = build_initial_concentration(cfg);
    const GridSpec g = cfg.grid();

    SimulationHistory hist;
    auto push_state = [&](double t, const ScalarField& u, PressureSolution& ps) {
        hist.times.push_back(t);
        hist.u.push_back(u);
        hist.p.push_back(ps.p);
        hist.v.push_back(ps.v);
        double m = 0.0;
        for (int c = 0; c < g.cell_count(); ++c) m += medium.porosity[c] * u[c];
        hist.mass.push_back(m * g.h * g.h);
        hist.min_u.push_back(u.min());
        hist.max_u.push_back(u.max());
    };

    PressureSolution ps0 = solve_pressure(u_cur, medium, fluid, sources, cfg.pressure_tol,
                                          cfg.pressure_max_iter);
    push_state(0.0, u_cur, ps0);

    double t = 0.0;
    const double t_end = cfg.t_final;
    while (t < t_end - 1e-12 * t_end) {
        PressureSolution ps = solve_pressure(u_cur, medium, fluid, sources, cfg.pressure_tol,
                                             cfg.pressure_max_iter);
        double dt = cfg.dt_policy == DtPolicy::fixed ? cfg.dt_value
                                                     : cfg.dt_value * suggest_dt(ps.v);
        dt = std::min(dt, t_end - t);

        PicardState pic;
        ScalarField guess = u_cur;
        PressureSolution ps_it = std::move(ps);
        TransportStepReport step;
        bool have_pressure = true;
        for (int it = 0; it < cfg.picard_max_iter; ++it) {
            if (!have_pressure)
                ps_it = solve_pressure(guess, medium, fluid, sources, cfg.pressure_tol,
                                       cfg.pressure_max_iter);
            have_pressure = false;
            TransportOptions topt;
            topt.tol = cfg.transport_tol;
            topt.max_iter = cfg.transport_max_iter;
            topt.k_trunc = cfg.k_trunc
                               ? cfg.k_trunc
                               : std::optional<int>(std::max(
                                     1, static_cast<int>(std::ceil(ps_it.v.max_cell_speed()))));
            if (cfg.lag_cross_picard) topt.cross_state = &guess;
            step = advance_concentration(u_cur, ps_it.v, medium, fluid, sources, dt, topt);
            pic.k_trunc_active = topt.k_trunc.value();
            const double res = detail::sup_diff(step.u_new, guess);
            pic.residuals.push_back(res);
            if (pic.residuals.size() > 1) {
                const double prev = pic.residuals[pic.residuals.size() - 2];
                pic.contraction_ratios.push_back(prev > 0.0 ? res / prev : 0.0);
            }
            pic.iterations = it + 1;
            guess = step.u_new;
            if (res <= cfg.picard_tol) {
                pic.converged = true;
                break;
            }
        }
        if (!pic.converged && cfg.strict_mode)
            throw solver_error("fixed-point iteration hit its cap without converging",
                               pic.residuals);

        u_cur = step.u_new;
        t += dt;
        hist.picard.push_back(pic);
        const StepBalance sb = detail::step_balance(step, sources);
        hist.balance.push_back(sb);
        hist.injected_total += sb.injected;
        hist.produced_total += sb.produced;
        push_state(t, u_cur, ps_it);
    }
    return hist;
}

}  // namespace mdsim
