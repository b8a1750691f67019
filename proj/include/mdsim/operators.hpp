#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "mdsim/errors.hpp"
#include "mdsim/field.hpp"
#include "mdsim/grid.hpp"

namespace mdsim {

struct GradientField {
    ScalarField gx;
    ScalarField gy;
};

/// Cell-centered gradient: central differences inside, second-order one-sided
/// stencils on the boundary rows/columns.
inline GradientField gradient(const ScalarField& f) {
    const GridSpec& g = f.grid;
    GradientField out{ScalarField(g), ScalarField(g)};
    const double inv2h = 1.0 / (2.0 * g.h);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            double gx;
            if (i == 0)
                gx = (-3.0 * f.at(0, j) + 4.0 * f.at(1, j) - f.at(2, j)) * inv2h;
            else if (i == g.nx - 1)
                gx = (3.0 * f.at(i, j) - 4.0 * f.at(i - 1, j) + f.at(i - 2, j)) * inv2h;
            else
                gx = (f.at(i + 1, j) - f.at(i - 1, j)) * inv2h;
            double gy;
            if (j == 0)
                gy = (-3.0 * f.at(i, 0) + 4.0 * f.at(i, 1) - f.at(i, 2)) * inv2h;
            else if (j == g.ny - 1)
                gy = (3.0 * f.at(i, j) - 4.0 * f.at(i, j - 1) + f.at(i, j - 2)) * inv2h;
            else
                gy = (f.at(i, j + 1) - f.at(i, j - 1)) * inv2h;
            out.gx.at(i, j) = gx;
            out.gy.at(i, j) = gy;
        }
    }
    return out;
}

/// Per-cell net outflux divided by cell area. Conservative: with zero
/// boundary fluxes the divergence telescopes to zero over the domain.
inline ScalarField divergence(const FluxField& F) {
    if (!F.boundary_fluxes_zero())
        throw config_error("divergence requires exactly zero boundary fluxes");
    const GridSpec& g = F.grid;
    ScalarField out(g);
    const double invh = 1.0 / g.h;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            out.at(i, j) = (F.x_face(i + 1, j) - F.x_face(i, j) + F.y_face(i, j + 1) -
                            F.y_face(i, j)) *
                           invh;
    return out;
}

/// Arithmetic mean over the ball's member cells, accumulated in membership
/// (row-major) order.
inline double ball_average(const ScalarField& f, const Ball& b) {
    if (b.cells.empty()) throw resolution_error("ball radius below grid resolution: no member cells");
    double s = 0.0;
    for (int c : b.cells) s += f[c];
    return s / static_cast<double>(b.cells.size());
}

struct CylinderSample {
    int cell = 0;
    double time = 0.0;
    double value = 0.0;
};

/// All (cell, time) samples of the history inside the cylinder.
inline std::vector<CylinderSample> cylinder_restrict(const FieldHistory& hist,
                                                     const Cylinder& q) {
    std::vector<CylinderSample> out;
    for (size_t s = 0; s < hist.size(); ++s) {
        if (!q.contains_time(hist.times[s])) continue;
        for (int c : q.ball.cells) out.push_back({c, hist.times[s], hist.fields[s][c]});
    }
    if (out.empty()) throw resolution_error("cylinder contains no stored samples");
    return out;
}

}  // namespace mdsim
