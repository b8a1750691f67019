#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mdsim/coefficients.hpp"
#include "mdsim/errors.hpp"
#include "mdsim/field.hpp"
#include "mdsim/linsolve.hpp"
#include "mdsim/operators.hpp"

namespace mdsim {

struct TransportStepReport {
    ScalarField u_new;
    double mass_before = 0.0;  // integral of porosity * u_old
    double mass_after = 0.0;   // integral of porosity * u_new
    double dt = 0.0;
    double min_u = 0.0;
    double max_u = 0.0;
    int linear_iterations = 0;
};

struct TransportOptions {
    double tol = 1e-14;
    int max_iter = 5000;
    /// Truncation level for the dispersion tensor; untruncated when absent.
    std::optional<int> k_trunc;
    /// Explicit cross-diffusion state; defaults to u_old when null. Letting a
    /// caller lag it one outer iteration is what the coupling loop uses.
    const ScalarField* cross_state = nullptr;
    /// Extra per-volume right-hand side (manufactured-solution forcing).
    const ScalarField* extra_rhs = nullptr;
};

namespace detail {

struct CellTensors {
    std::vector<double> dxx, dxy, dyy;  // porosity * dispersion tensor entries
};

inline CellTensors cell_dispersion(const FluxField& v, const MediumSpec& medium,
                                   const FluidSpec& fluid, const std::optional<int>& k_trunc) {
    const GridSpec& g = v.grid;
    const int n = g.cell_count();
    CellTensors ct;
    ct.dxx.resize(n);
    ct.dxy.resize(n);
    ct.dyy.resize(n);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const int c = g.lin(i, j);
            const Vec2 vc = v.cell_velocity(i, j);
            const SymTensor2 d =
                k_trunc ? truncated_dispersion(vc, *k_trunc, fluid) : dispersion_tensor(vc, fluid);
            const double phi = medium.porosity[c];
            ct.dxx[c] = phi * d.xx;
            ct.dxy[c] = phi * d.xy;
            ct.dyy[c] = phi * d.yy;
        }
    return ct;
}

/// Explicit cross-diffusion contribution: divergence of the off-diagonal part
/// of the diffusive flux, evaluated at a lagged concentration state.
inline ScalarField cross_diffusion_divergence(const ScalarField& u, const CellTensors& ct) {
    const GridSpec& g = u.grid;
    bool any = false;
    for (double d : ct.dxy)
        if (d != 0.0) {
            any = true;
            break;
        }
    if (!any) return ScalarField(g);
    const GradientField grad = gradient(u);
    FluxField F(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i) {
            const int L = g.lin(i - 1, j), R = g.lin(i, j);
            F.x_face(i, j) = 0.5 * (ct.dxy[L] + ct.dxy[R]) * 0.5 * (grad.gy[L] + grad.gy[R]);
        }
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const int B = g.lin(i, j - 1), T = g.lin(i, j);
            F.y_face(i, j) = 0.5 * (ct.dxy[B] + ct.dxy[T]) * 0.5 * (grad.gx[B] + grad.gx[T]);
        }
    return divergence(F);
}

}  // namespace detail

/// Advective CFL suggestion; the implicit scheme is unconditionally stable,
/// this is an accuracy guide.
inline double suggest_dt(const FluxField& v) {
    return v.grid.h / std::max(v.max_cell_speed(), 1e-12);
}

/// One backward-Euler step of
///   porosity * du/dt - div(porosity * D_k(v) grad u - u v) + q_P u = q_I u_hat.
/// Face-normal diffusion is implicit with harmonic face averaging, advection
/// is first-order upwind (implicit), cross-diffusion is an explicit deferred
/// correction. The implicit matrix is an M-matrix, so the step satisfies the
/// discrete maximum principle, and conservative fluxes give an exact discrete
/// mass balance up to the linear-solver residual.
inline TransportStepReport advance_concentration(const ScalarField& u_old, const FluxField& v,
                                                 const MediumSpec& medium, const FluidSpec& fluid,
                                                 const SourceSpec& sources, double dt,
                                                 const TransportOptions& opts = {}) {
    if (!(dt > 0.0)) throw config_error("transport step requires dt > 0");
    if (!v.boundary_fluxes_zero())
        throw config_error("transport velocity must have exactly zero boundary fluxes");
    const GridSpec& g = u_old.grid;
    const int n = g.cell_count();
    const double invh = 1.0 / g.h;
    const double inv_h2 = invh * invh;

    const detail::CellTensors ct = detail::cell_dispersion(v, medium, fluid, opts.k_trunc);

    MatrixBuilder bld(n);
    std::vector<double> rhs(static_cast<size_t>(n));

    for (int c = 0; c < n; ++c) {
        const double phi_dt = medium.porosity[c] / dt;
        bld.add(c, c, phi_dt + sources.q_produce[c]);
        rhs[c] = phi_dt * u_old[c] + sources.q_inject[c] * sources.u_hat[c];
    }

    // interior x-faces: implicit normal diffusion + upwind advection
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i) {
            const int L = g.lin(i - 1, j), R = g.lin(i, j);
            const double t = detail::harmonic(ct.dxx[L], ct.dxx[R]) * inv_h2;
            bld.add(L, L, t);
            bld.add(R, R, t);
            bld.add(L, R, -t);
            bld.add(R, L, -t);
            const double a = v.x_face(i, j) * invh;
            if (a >= 0.0) {
                bld.add(L, L, a);
                bld.add(R, L, -a);
            } else {
                bld.add(L, R, a);
                bld.add(R, R, -a);
            }
        }
    // interior y-faces
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const int B = g.lin(i, j - 1), T = g.lin(i, j);
            const double t = detail::harmonic(ct.dyy[B], ct.dyy[T]) * inv_h2;
            bld.add(B, B, t);
            bld.add(T, T, t);
            bld.add(B, T, -t);
            bld.add(T, B, -t);
            const double a = v.y_face(i, j) * invh;
            if (a >= 0.0) {
                bld.add(B, B, a);
                bld.add(T, B, -a);
            } else {
                bld.add(B, T, a);
                bld.add(T, T, -a);
            }
        }

    const ScalarField& cross_state = opts.cross_state ? *opts.cross_state : u_old;
    const ScalarField cross_div = detail::cross_diffusion_divergence(cross_state, ct);
    for (int c = 0; c < n; ++c) rhs[c] += cross_div[c];
    if (opts.extra_rhs)
        for (int c = 0; c < n; ++c) rhs[c] += (*opts.extra_rhs)[c];

    const SparseMatrix A = bld.build();
    SolveResult r = bicgstab(A, rhs, opts.tol, std::numeric_limits<double>::infinity(),
                             opts.max_iter, &u_old.v);
    if (!r.converged)
        throw solver_error("transport linear solve did not converge", r.history);

    TransportStepReport rep;
    rep.u_new = ScalarField(g);
    rep.u_new.v = std::move(r.x);
    rep.dt = dt;
    rep.linear_iterations = r.iterations;
    double mb = 0.0, ma = 0.0;
    for (int c = 0; c < n; ++c) {
        mb += medium.porosity[c] * u_old[c];
        ma += medium.porosity[c] * rep.u_new[c];
    }
    rep.mass_before = mb * g.h * g.h;
    rep.mass_after = ma * g.h * g.h;
    rep.min_u = rep.u_new.min();
    rep.max_u = rep.u_new.max();
    return rep;
}

struct EnergyReport {
    /// sup over snapshots of the porosity-weighted concentration energy.
    double sup_concentration_energy = 0.0;
    /// time-integrated velocity-weighted gradient energy.
    double gradient_dissipation = 0.0;

    double total() const { return sup_concentration_energy + gradient_dissipation; }
};

/// Discrete analog of the a-priori energy functional:
///   sup_t int(porosity u^2) + int_t int((1 + |v|) |grad u|^2).
inline EnergyReport energy_monitor(const FieldHistory& u_hist,
                                   const std::vector<FluxField>& v_hist,
                                   const MediumSpec& medium) {
    if (u_hist.size() == 0) return {};
    if (v_hist.size() != u_hist.size())
        throw config_error("energy monitor requires aligned concentration and velocity history");
    EnergyReport rep;
    const GridSpec& g = u_hist.fields[0].grid;
    const double cell = g.h * g.h;
    for (size_t s = 0; s < u_hist.size(); ++s) {
        const ScalarField& u = u_hist.fields[s];
        double e = 0.0;
        for (int c = 0; c < g.cell_count(); ++c) e += medium.porosity[c] * u[c] * u[c];
        rep.sup_concentration_energy = std::max(rep.sup_concentration_energy, e * cell);
        if (s == 0) continue;
        const double dt = u_hist.times[s] - u_hist.times[s - 1];
        const GradientField grad = gradient(u);
        double d = 0.0;
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const int c = g.lin(i, j);
                const double speed = v_hist[s].cell_velocity(i, j).norm();
                d += (1.0 + speed) * (grad.gx[c] * grad.gx[c] + grad.gy[c] * grad.gy[c]);
            }
        rep.gradient_dissipation += dt * d * cell;
    }
    return rep;
}

}  // namespace mdsim
