#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "mdsim/coefficients.hpp"
#include "mdsim/errors.hpp"
#include "mdsim/field.hpp"
#include "mdsim/grid.hpp"
#include "mdsim/operators.hpp"
#include "mdsim/pressure.hpp"
#include "mdsim/transport.hpp"

namespace mdsim::mms {

inline constexpr double kPi = std::numbers::pi;

/// Exactly divergence-free face velocities from stream-function node values:
/// the x-face flux is the forward difference of psi along y, the y-face flux
/// the negative forward difference along x, so the per-cell divergence
/// telescopes. Boundary nodes are forced to zero, which zeroes every
/// domain-boundary face exactly.
inline FluxField flux_from_stream_nodes(const GridSpec& g, std::vector<double> psi) {
    const int nn = (g.nx + 1) * (g.ny + 1);
    if (static_cast<int>(psi.size()) != nn)
        throw config_error("stream-function node array size does not match the grid");
    const auto node = [&](int i, int j) -> double& { return psi[j * (g.nx + 1) + i]; };
    for (int i = 0; i <= g.nx; ++i) {
        node(i, 0) = 0.0;
        node(i, g.ny) = 0.0;
    }
    for (int j = 0; j <= g.ny; ++j) {
        node(0, j) = 0.0;
        node(g.nx, j) = 0.0;
    }
    FluxField v(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i)
            v.x_face(i, j) = (node(i, j + 1) - node(i, j)) / g.h;
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            v.y_face(i, j) = -(node(i + 1, j) - node(i, j)) / g.h;
    return v;
}

/// Single-vortex velocity with stream function (amp/pi) sin(pi x) sin(pi y).
inline FluxField stream_function_flux(const GridSpec& g, double amplitude) {
    std::vector<double> psi(static_cast<size_t>((g.nx + 1) * (g.ny + 1)));
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i)
            psi[j * (g.nx + 1) + i] = (amplitude / kPi) * std::sin(kPi * (g.x0 + i * g.h)) *
                                      std::sin(kPi * (g.y0 + j * g.h));
    return flux_from_stream_nodes(g, std::move(psi));
}

// ---------------------------------------------------------------------------
// Pressure study: manufactured solution cos(pi x) cos(pi y) on the unit
// square with identity permeability and unit viscosity, driven by the source
// density 2 pi^2 cos(pi x) cos(pi y) split into its positive and negative
// parts.
// ---------------------------------------------------------------------------

inline double pressure_solution(double x, double y) {
    return std::cos(kPi * x) * std::cos(kPi * y);
}

inline double pressure_forcing(double x, double y) {
    return 2.0 * kPi * kPi * std::cos(kPi * x) * std::cos(kPi * y);
}

/// L2 error of the discrete pressure against the manufactured solution (both
/// normalized to zero discrete mean).
inline double pressure_mms_error(int n, double tol = 1e-10) {
    if (n < 4) throw config_error("manufactured pressure study requires at least a 4x4 grid");
    const GridSpec g{n, n, 1.0 / n, 0.0, 0.0};
    MediumSpec medium{ScalarField(g, 1.0), SymTensorField(g, 1.0, 0.0, 1.0)};
    medium.validate();
    FluidSpec fluid;
    fluid.law = ViscosityLaw::constant;
    fluid.mu0 = 1.0;
    fluid.validate();
    SourceSpec src{ScalarField(g), ScalarField(g), ScalarField(g, 0.0)};
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double f = pressure_forcing(g.cx(i), g.cy(j));
            if (f >= 0.0)
                src.q_inject.at(i, j) = f;
            else
                src.q_produce.at(i, j) = -f;
        }
    const PressureSolution sol = solve_pressure(ScalarField(g, 0.0), medium, fluid, src, tol);

    ScalarField exact(g);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) exact.at(i, j) = pressure_solution(g.cx(i), g.cy(j));
    const double shift = exact.mean();
    double err2 = 0.0;
    for (size_t c = 0; c < exact.v.size(); ++c) {
        const double d = sol.p.v[c] - (exact.v[c] - shift);
        err2 += d * d;
    }
    return std::sqrt(err2 * g.h * g.h);
}

// ---------------------------------------------------------------------------
// Transport study: steady manufactured concentration
//   u* = 1/2 + 1/4 cos(pi x) cos(pi y)
// advected by the single-vortex velocity of amplitude 2, with dispersion
// m = 1e-3, a = 2e-3, b = 4e-3 and unit porosity. The forcing below is the
// machine-generated closed form of -div(D(v) grad u* - u* v) for exactly
// those parameters; changing them requires regenerating the expression.
// ---------------------------------------------------------------------------

inline constexpr double kTransportAmplitude = 2.0;
inline constexpr double kTransportMolecular = 1e-3;
inline constexpr double kTransportTransverse = 2e-3;
inline constexpr double kTransportLongitudinal = 4e-3;

inline double transport_solution(double x, double y) {
    return 0.5 + 0.25 * std::cos(kPi * x) * std::cos(kPi * y);
}

inline double transport_forcing(double x, double y) {
  const double x0 = kPi*x;
  const double x1 = std::pow(std::sin(x0), 2);
  const double x2 = kPi*y;
  const double x3 = std::cos(x2);
  const double x4 = std::pow(x3, 2);
  const double x5 = x1*x4;
  const double x6 = std::pow(std::sin(x2), 2);
  const double x7 = std::cos(x0);
  const double x8 = std::pow(x7, 2);
  const double x9 = x6*x8;
  const double x10 = x5 + x9;
  const double x11 = std::sqrt(x10);
  const double x12 = 1.0/x11;
  const double x13 = 4*x12;
  const double x14 = x1*x13;
  const double x15 = kPi*std::pow(x3, 3)*x7;
  const double x16 = x13*x6;
  const double x17 = kPi*x3;
  const double x18 = x17*std::pow(x7, 3);
  const double x19 = x17*x7;
  const double x20 = x1*x6;
  const double x21 = x1 - x8;
  const double x22 = 4*x20/std::pow(x10, 3.0/2.0);
  const double x23 = -x4 + x6;
  const double x24 = 4*x11 + 1;
  const double x25 = 1.0/x10;
  return (1.0/4000.0)*kPi*(16*x12*x19*x20 - x14*x15 + x14*x19*(x23*x25*x5 + 3*x4 - x6) - x15*x21*x22 - x16*x18 + x16*x19*(-x1 + x21*x25*x9 + 3*x8) - x18*x22*x23 + x19*(x13*x5 + x24) + x19*(x13*x9 + x24) - 2000*x5 + 2000*x9);
}

/// L2 error of the steady transport solution, reached by backward-Euler
/// pseudo-time continuation with geometrically growing steps from a flat
/// initial state. The continuation stops once successive iterates agree to
/// 1e-10 in the sup norm or the outer budget runs out; either way the
/// remaining continuation residual sits far below the discretization error
/// the study measures.
inline double transport_mms_error(int n, int max_outer = 200) {
    if (n < 4) throw config_error("manufactured transport study requires at least a 4x4 grid");
    const GridSpec g{n, n, 1.0 / n, 0.0, 0.0};
    MediumSpec medium{ScalarField(g, 1.0), SymTensorField(g, 1.0, 0.0, 1.0)};
    medium.validate();
    FluidSpec fluid;
    fluid.m = kTransportMolecular;
    fluid.a = kTransportTransverse;
    fluid.b = kTransportLongitudinal;
    fluid.law = ViscosityLaw::constant;
    fluid.validate();
    const SourceSpec src{ScalarField(g, 0.0), ScalarField(g, 0.0), ScalarField(g, 0.0)};
    const FluxField v = stream_function_flux(g, kTransportAmplitude);

    ScalarField forcing(g);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) forcing.at(i, j) = transport_forcing(g.cx(i), g.cy(j));

    ScalarField u(g, 0.5);
    double dt = 0.05;
    TransportOptions opts;
    opts.tol = 1e-13;
    opts.max_iter = 20000;
    opts.extra_rhs = &forcing;
    for (int outer = 0; outer < max_outer; ++outer) {
        const TransportStepReport step = advance_concentration(u, v, medium, fluid, src, dt, opts);
        double delta = 0.0;
        for (size_t c = 0; c < u.v.size(); ++c)
            delta = std::max(delta, std::abs(step.u_new.v[c] - u.v[c]));
        u = step.u_new;
        if (delta <= 1e-10) break;
        dt = std::min(dt * 2.0, 1e3);
    }

    double err2 = 0.0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double d = u.at(i, j) - transport_solution(g.cx(i), g.cy(j));
            err2 += d * d;
        }
    return std::sqrt(err2 * g.h * g.h);
}

struct MmsRow {
    int n = 0;
    double pressure_error = 0.0;
    double transport_error = 0.0;
    double pressure_order = 0.0;
    double transport_order = 0.0;
    bool has_order = false;  // false on the first row of a study
};

/// Run both studies over the grid list and attach observed orders between
/// consecutive grids. A single-grid call yields one row without orders.
inline std::vector<MmsRow> mms_convergence_study(const std::vector<int>& grids) {
    if (grids.empty()) throw config_error("convergence study requires at least one grid");
    std::vector<MmsRow> rows;
    rows.reserve(grids.size());
    for (int n : grids) {
        MmsRow row;
        row.n = n;
        row.pressure_error = pressure_mms_error(n);
        row.transport_error = transport_mms_error(n);
        rows.push_back(row);
    }
    for (size_t k = 1; k < rows.size(); ++k) {
        const double ratio = std::log2(static_cast<double>(rows[k].n) /
                                       static_cast<double>(rows[k - 1].n));
        if (ratio <= 0.0) continue;
        rows[k].pressure_order =
            std::log2(rows[k - 1].pressure_error / rows[k].pressure_error) / ratio;
        rows[k].transport_order =
            std::log2(rows[k - 1].transport_error / rows[k].transport_error) / ratio;
        rows[k].has_order = true;
    }
    return rows;
}

}  // namespace mdsim::mms
