#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mdsim/grid.hpp"

namespace mdsim {

/// Cell-centered scalar field, row-major storage.
struct ScalarField {
    GridSpec grid;
    std::vector<double> v;

    ScalarField() = default;
    explicit ScalarField(const GridSpec& g, double fill = 0.0)
        : grid(g), v(static_cast<size_t>(g.cell_count()), fill) {}

    double& at(int i, int j) { return v[grid.lin(i, j)]; }
    double at(int i, int j) const { return v[grid.lin(i, j)]; }
    double& operator[](int lin) { return v[lin]; }
    double operator[](int lin) const { return v[lin]; }

    double min() const { return *std::min_element(v.begin(), v.end()); }
    double max() const { return *std::max_element(v.begin(), v.end()); }
    double sum() const { return std::accumulate(v.begin(), v.end(), 0.0); }
    double mean() const { return sum() / static_cast<double>(v.size()); }
    /// Domain integral: sum of cell values times cell area.
    double integral() const { return sum() * grid.h * grid.h; }
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    double norm() const { return std::hypot(x, y); }
};

/// Symmetric 2x2 tensor.
struct SymTensor2 {
    double xx = 0.0;
    double xy = 0.0;
    double yy = 0.0;

    /// Eigenvalues, smaller first.
    std::pair<double, double> eigenvalues() const {
        const double tr = xx + yy;
        const double d = std::sqrt(0.25 * (xx - yy) * (xx - yy) + xy * xy);
        return {0.5 * tr - d, 0.5 * tr + d};
    }

    /// Quadratic form xi . T xi.
    double quad(const Vec2& xi) const {
        return xx * xi.x * xi.x + 2.0 * xy * xi.x * xi.y + yy * xi.y * xi.y;
    }
};

/// Cell-centered symmetric tensor field (e.g. permeability).
struct SymTensorField {
    GridSpec grid;
    std::vector<double> xx, xy, yy;

    SymTensorField() = default;
    SymTensorField(const GridSpec& g, double dxx, double dxy, double dyy)
        : grid(g),
          xx(static_cast<size_t>(g.cell_count()), dxx),
          xy(static_cast<size_t>(g.cell_count()), dxy),
          yy(static_cast<size_t>(g.cell_count()), dyy) {}

    SymTensor2 at(int lin) const { return {xx[lin], xy[lin], yy[lin]}; }
    void set(int lin, const SymTensor2& t) {
        xx[lin] = t.xx;
        xy[lin] = t.xy;
        yy[lin] = t.yy;
    }
};

/// Face-normal velocities on a staggered layout. fx holds the x-component on
/// vertical faces ((nx+1) * ny, index j*(nx+1)+i), fy the y-component on
/// horizontal faces (nx * (ny+1), index j*nx+i). Domain-boundary faces are
/// required to carry exactly zero flux.
struct FluxField {
    GridSpec grid;
    std::vector<double> fx;
    std::vector<double> fy;

    FluxField() = default;
    explicit FluxField(const GridSpec& g)
        : grid(g),
          fx(static_cast<size_t>((g.nx + 1) * g.ny), 0.0),
          fy(static_cast<size_t>(g.nx * (g.ny + 1)), 0.0) {}

    double& x_face(int i, int j) { return fx[j * (grid.nx + 1) + i]; }
    double x_face(int i, int j) const { return fx[j * (grid.nx + 1) + i]; }
    double& y_face(int i, int j) { return fy[j * grid.nx + i]; }
    double y_face(int i, int j) const { return fy[j * grid.nx + i]; }

    bool boundary_fluxes_zero() const {
        for (int j = 0; j < grid.ny; ++j)
            if (x_face(0, j) != 0.0 || x_face(grid.nx, j) != 0.0) return false;
        for (int i = 0; i < grid.nx; ++i)
            if (y_face(i, 0) != 0.0 || y_face(i, grid.ny) != 0.0) return false;
        return true;
    }

    /// Cell-centered velocity reconstructed by averaging the two opposite faces.
    Vec2 cell_velocity(int i, int j) const {
        return {0.5 * (x_face(i, j) + x_face(i + 1, j)),
                0.5 * (y_face(i, j) + y_face(i, j + 1))};
    }

    double max_cell_speed() const {
        double m = 0.0;
        for (int j = 0; j < grid.ny; ++j)
            for (int i = 0; i < grid.nx; ++i) m = std::max(m, cell_velocity(i, j).norm());
        return m;
    }
};

/// Time-indexed sequence of snapshots of one scalar field.
struct FieldHistory {
    std::vector<double> times;
    std::vector<ScalarField> fields;

    size_t size() const { return times.size(); }
    void push(double t, ScalarField f) {
        times.push_back(t);
        fields.push_back(std::move(f));
    }
};

}  // namespace mdsim
