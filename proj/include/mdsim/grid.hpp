#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mdsim/errors.hpp"

namespace mdsim {

/// Uniform cell-centered grid on the rectangle [x0, x0+nx*h] x [y0, y0+ny*h].
/// Cells are indexed row-major: lin = j*nx + i.
struct GridSpec {
    int nx = 0;
    int ny = 0;
    double h = 0.0;
    double x0 = 0.0;
    double y0 = 0.0;

    int cell_count() const { return nx * ny; }
    int lin(int i, int j) const { return j * nx + i; }
    bool in_bounds(int i, int j) const { return i >= 0 && i < nx && j >= 0 && j < ny; }

    double cx(int i) const { return x0 + (i + 0.5) * h; }
    double cy(int j) const { return y0 + (j + 0.5) * h; }

    double area() const { return nx * h * ny * h; }
    double diameter() const { return std::hypot(nx * h, ny * h); }

    bool operator==(const GridSpec&) const = default;
};

/// Discrete ball: the set of cells whose centers lie within Euclidean
/// distance `radius` of the center cell's center. Membership is enumerated
/// in row-major order so that averages over balls are reproducible bitwise.
struct Ball {
    int ci = 0;
    int cj = 0;
    double radius = 0.0;
    std::vector<int> cells;
};

inline Ball make_ball(const GridSpec& g, int ci, int cj, double radius) {
    if (!g.in_bounds(ci, cj)) throw config_error("ball center cell out of bounds");
    if (radius < 0.0) throw config_error("ball radius must be nonnegative");
    Ball b;
    b.ci = ci;
    b.cj = cj;
    b.radius = radius;
    const double r2 = radius * radius;
    const int span = static_cast<int>(std::floor(radius / g.h)) + 1;
    const int jlo = std::max(0, cj - span), jhi = std::min(g.ny - 1, cj + span);
    const int ilo = std::max(0, ci - span), ihi = std::min(g.nx - 1, ci + span);
    for (int j = jlo; j <= jhi; ++j) {
        for (int i = ilo; i <= ihi; ++i) {
            const double dx = (i - ci) * g.h;
            const double dy = (j - cj) * g.h;
            if (dx * dx + dy * dy <= r2) b.cells.push_back(g.lin(i, j));
        }
    }
    return b;
}

/// Space-time cylinder: ball x time window (t0 - r^2/2, t0 + r^2/2].
struct Cylinder {
    Ball ball;
    double t0 = 0.0;

    double t_lo() const { return t0 - 0.5 * ball.radius * ball.radius; }
    double t_hi() const { return t0 + 0.5 * ball.radius * ball.radius; }
    bool contains_time(double t) const { return t > t_lo() && t <= t_hi(); }
};

/// Dyadic radius ladder {0, h, 2h, 4h, ...} ending at the first radius that
/// covers the whole domain. The zero entry is the single-cell ball.
inline std::vector<double> dyadic_ladder(const GridSpec& g) {
    std::vector<double> out{0.0};
    double r = g.h;
    const double cover = g.diameter();
    while (true) {
        out.push_back(r);
        if (r >= cover) break;
        r *= 2.0;
    }
    return out;
}

}  // namespace mdsim
