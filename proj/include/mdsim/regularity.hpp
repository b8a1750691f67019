#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "mdsim/coefficients.hpp"
#include "mdsim/errors.hpp"
#include "mdsim/field.hpp"
#include "mdsim/grid.hpp"
#include "mdsim/linsolve.hpp"
#include "mdsim/operators.hpp"

namespace mdsim {

/// Centered maximal function over the dyadic radius ladder: at each cell the
/// maximum, over ladder radii (the zero entry is the single-cell ball), of the
/// average of |f| over the domain-clipped ball. Clipping to the domain is the
/// declared convention; every oracle must use the same membership rule.
inline ScalarField maximal_function(const ScalarField& f) {
    const GridSpec& g = f.grid;
    ScalarField absf(g);
    for (size_t c = 0; c < f.v.size(); ++c) absf[static_cast<int>(c)] = std::abs(f.v[c]);
    const std::vector<double> ladder = dyadic_ladder(g);
    ScalarField out(g);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            double best = 0.0;
            for (double r : ladder) {
                const Ball b = make_ball(g, i, j, r);
                best = std::max(best, ball_average(absf, b));
            }
            out.at(i, j) = best;
        }
    }
    return out;
}

namespace detail {

/// Mean absolute deviation over a ball, evaluated as sum|n*f_i - s| / n^2 with
/// s the plain member sum. Algebraically equal to the average of |f - mean|,
/// but every intermediate stays exact for fields of in-range dyadic values, so
/// adding an exactly representable constant leaves the result bitwise
/// unchanged.
inline double ball_mean_abs_deviation(const ScalarField& f, const Ball& b) {
    const double n = static_cast<double>(b.cells.size());
    double s = 0.0;
    for (int c : b.cells) s += f[c];
    double dev = 0.0;
    for (int c : b.cells) dev += std::abs(n * f[c] - s);
    return dev / (n * n);
}

}  // namespace detail

/// Sharp function: at each cell the maximum, over all balls of the dyadic
/// ladder that contain the cell (any center, any ladder radius, domain
/// clipped), of the mean absolute deviation of f over that ball.
inline ScalarField sharp_function(const ScalarField& f) {
    const GridSpec& g = f.grid;
    const std::vector<double> ladder = dyadic_ladder(g);
    ScalarField out(g, 0.0);
    for (int cj = 0; cj < g.ny; ++cj) {
        for (int ci = 0; ci < g.nx; ++ci) {
            for (double r : ladder) {
                const Ball b = make_ball(g, ci, cj, r);
                const double dev = detail::ball_mean_abs_deviation(f, b);
                for (int c : b.cells) out[c] = std::max(out[c], dev);
            }
        }
    }
    return out;
}

/// Empirical norm-equivalence ratio ||f - mean(f)||_ell / ||f#||_ell with
/// plain cell sums (the uniform cell-area weight cancels).
inline double fefferman_stein_ratio(const ScalarField& f, double ell) {
    if (!(ell > 1.0)) throw config_error("norm-equivalence ratio requires an exponent > 1");
    const ScalarField sharp = sharp_function(f);
    if (sharp.max() == 0.0)
        throw config_error("degenerate input: a constant field has zero sharp function");
    const double m = f.mean();
    double num = 0.0, den = 0.0;
    for (size_t c = 0; c < f.v.size(); ++c) {
        num += std::pow(std::abs(f.v[c] - m), ell);
        den += std::pow(sharp.v[c], ell);
    }
    return std::pow(num, 1.0 / ell) / std::pow(den, 1.0 / ell);
}

/// For each requested radius, the time-sup over the history of the ball
/// average of |grad p|^2 around the given cell. Balls are domain-clipped.
inline std::vector<std::pair<double, double>> local_gradient_energy(
    const FieldHistory& p_history, int ci, int cj, const std::vector<double>& radii) {
    if (p_history.size() == 0)
        throw config_error("gradient energy requires a nonempty history window");
    const GridSpec& g = p_history.fields.front().grid;
    std::vector<ScalarField> energy;
    energy.reserve(p_history.size());
    for (const ScalarField& p : p_history.fields) {
        const GradientField grad = gradient(p);
        ScalarField e2(g);
        for (size_t c = 0; c < e2.v.size(); ++c)
            e2.v[c] = grad.gx.v[c] * grad.gx.v[c] + grad.gy.v[c] * grad.gy.v[c];
        energy.push_back(std::move(e2));
    }
    std::vector<std::pair<double, double>> out;
    out.reserve(radii.size());
    for (double rho : radii) {
        const Ball b = make_ball(g, ci, cj, rho);
        double sup = 0.0;
        for (const ScalarField& e2 : energy) sup = std::max(sup, ball_average(e2, b));
        out.emplace_back(rho, sup);
    }
    return out;
}

/// Oscillation (max - min) of u over the space-time cylinder of each radius:
/// ball of radius r around the cell, time window (t0 - r^2/2, t0 + r^2/2].
inline std::vector<std::pair<double, double>> cylinder_oscillation(
    const FieldHistory& u_history, int ci, int cj, double t0,
    const std::vector<double>& radii) {
    if (u_history.size() == 0)
        throw config_error("cylinder oscillation requires a nonempty history window");
    const GridSpec& g = u_history.fields.front().grid;
    std::vector<std::pair<double, double>> out;
    out.reserve(radii.size());
    for (double r : radii) {
        const Cylinder q{make_ball(g, ci, cj, r), t0};
        const std::vector<CylinderSample> samples = cylinder_restrict(u_history, q);
        double lo = samples.front().value, hi = samples.front().value;
        for (const CylinderSample& s : samples) {
            lo = std::min(lo, s.value);
            hi = std::max(hi, s.value);
        }
        out.emplace_back(r, hi - lo);
    }
    return out;
}

struct DecayFit {
    double alpha = 0.0;
    double rms_residual = 0.0;
    bool conclusive = false;
};

/// Least-squares slope of log(oscillation) against log(radius) over the
/// series entries with positive radius and positive oscillation. Fewer than
/// three usable points leave the fit inconclusive.
inline DecayFit decay_exponent_fit(const std::vector<std::pair<double, double>>& osc_series) {
    std::vector<double> lx, ly;
    for (const auto& [r, w] : osc_series) {
        if (r > 0.0 && w > 0.0) {
            lx.push_back(std::log(r));
            ly.push_back(std::log(w));
        }
    }
    DecayFit fit;
    if (lx.size() < 3) return fit;
    const double n = static_cast<double>(lx.size());
    double mx = 0.0, my = 0.0;
    for (size_t k = 0; k < lx.size(); ++k) {
        mx += lx[k];
        my += ly[k];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (size_t k = 0; k < lx.size(); ++k) {
        sxx += (lx[k] - mx) * (lx[k] - mx);
        sxy += (lx[k] - mx) * (ly[k] - my);
    }
    if (sxx == 0.0) return fit;
    fit.alpha = sxy / sxx;
    double ss = 0.0;
    for (size_t k = 0; k < lx.size(); ++k) {
        const double resid = ly[k] - (my + fit.alpha * (lx[k] - mx));
        ss += resid * resid;
    }
    fit.rms_residual = std::sqrt(ss / n);
    fit.conclusive = true;
    return fit;
}

struct LevelSetFraction {
    double fraction = 0.0;
    bool degenerate = false;
};

/// Fraction of ball cells lying above max - range/2^level_exponent. A flat
/// field has zero range; the result is then flagged degenerate.
inline LevelSetFraction level_set_fraction(const ScalarField& u, const Ball& b,
                                           double level_exponent) {
    if (b.cells.empty()) throw resolution_error("level-set test requires a nonempty ball");
    double lo = u[b.cells.front()], hi = u[b.cells.front()];
    for (int c : b.cells) {
        lo = std::min(lo, u[c]);
        hi = std::max(hi, u[c]);
    }
    if (hi - lo == 0.0) return {0.0, true};
    const double threshold = hi - (hi - lo) / std::exp2(level_exponent);
    int count = 0;
    for (int c : b.cells)
        if (u[c] > threshold) ++count;
    return {static_cast<double>(count) / static_cast<double>(b.cells.size()), false};
}

/// Logarithmic barrier transform on the cylinder's ball:
///   v = ln[(range + slack) / (2^level_exponent * (max - u) + slack)].
/// The positive slack keeps the argument finite where u attains the maximum.
/// Returned as a full-grid field, zero outside the ball.
inline ScalarField log_barrier_field(const ScalarField& u, const Cylinder& q,
                                     double level_exponent, double slack) {
    if (!(slack > 0.0))
        throw config_error("logarithmic barrier requires a positive slack offset");
    const Ball& b = q.ball;
    if (b.cells.empty()) throw resolution_error("logarithmic barrier requires a nonempty ball");
    double lo = u[b.cells.front()], hi = u[b.cells.front()];
    for (int c : b.cells) {
        lo = std::min(lo, u[c]);
        hi = std::max(hi, u[c]);
    }
    const double range = hi - lo;
    const double scale = std::exp2(level_exponent);
    ScalarField out(u.grid, 0.0);
    for (int c : b.cells) out[c] = std::log((range + slack) / (scale * (hi - u[c]) + slack));
    return out;
}

struct FrozenComparison {
    double gap = 0.0;
    double eta = 0.0;
    int solver_iterations = 0;
};

namespace detail {

/// Coefficient-oscillation indicator for a ball: the oscillation of
/// |mu(u(center)) - mu(u)| over the ball plus the squared largest entrywise
/// oscillation of the permeability tensor.
inline double coefficient_oscillation(const ScalarField& u, const MediumSpec& medium,
                                      const FluidSpec& fluid, const Ball& b) {
    const int center = u.grid.lin(b.ci, b.cj);
    const double mu_center = viscosity(u[center], fluid);
    double mu_lo = std::numeric_limits<double>::infinity(), mu_hi = 0.0;
    double kxx_lo = mu_lo, kxx_hi = -mu_lo;
    double kxy_lo = mu_lo, kxy_hi = -mu_lo;
    double kyy_lo = mu_lo, kyy_hi = -mu_lo;
    for (int c : b.cells) {
        const double dmu = std::abs(mu_center - viscosity(u[c], fluid));
        mu_lo = std::min(mu_lo, dmu);
        mu_hi = std::max(mu_hi, dmu);
        kxx_lo = std::min(kxx_lo, medium.permeability.xx[c]);
        kxx_hi = std::max(kxx_hi, medium.permeability.xx[c]);
        kxy_lo = std::min(kxy_lo, medium.permeability.xy[c]);
        kxy_hi = std::max(kxy_hi, medium.permeability.xy[c]);
        kyy_lo = std::min(kyy_lo, medium.permeability.yy[c]);
        kyy_hi = std::max(kyy_hi, medium.permeability.yy[c]);
    }
    const double osc_k =
        std::max(kxx_hi - kxx_lo, std::max(kxy_hi - kxy_lo, kyy_hi - kyy_lo));
    return (mu_hi - mu_lo) + osc_k * osc_k;
}

}  // namespace detail

/// Frozen-coefficient comparison. The pressure is multiplied by a radial
/// cutoff (1 inside the cutoff radius, tapering linearly to 0 at the ball
/// rim; a cutoff radius at or beyond the rim means no taper), and the
/// constant-coefficient problem
///   -div(A grad phi) = 0,  A = (ball-averaged K) / mu(u(center)),
/// is solved on the ball's interior cells with the cutoff pressure as
/// Dirichlet data. Returns the discrete gradient energy of (phi - data)
/// together with the coefficient-oscillation indicator of the ball.
inline FrozenComparison frozen_coefficient_comparison(const ScalarField& p,
                                                      const ScalarField& u,
                                                      const MediumSpec& medium,
                                                      const FluidSpec& fluid, const Ball& ball,
                                                      double cutoff_radius,
                                                      double tol = 1e-12, int max_iter = 20000) {
    const GridSpec& g = p.grid;
    const double R = ball.radius;
    const double h = g.h;
    if (R < h) throw resolution_error("comparison ball is less than three cells across");
    const double slack = 1e-12 * g.diameter();
    const double cx0 = g.cx(ball.ci), cy0 = g.cy(ball.cj);
    if (cx0 - R < g.x0 - slack || cx0 + R > g.x0 + g.nx * h + slack ||
        cy0 - R < g.y0 - slack || cy0 + R > g.y0 + g.ny * h + slack)
        throw config_error("comparison ball must lie within the domain");

    // Frozen tensor: entrywise ball average of K over the viscosity at the
    // center cell.
    const double mu_center = viscosity(u[g.lin(ball.ci, ball.cj)], fluid);
    double axx = 0.0, axy = 0.0, ayy = 0.0;
    for (int c : ball.cells) {
        axx += medium.permeability.xx[c];
        axy += medium.permeability.xy[c];
        ayy += medium.permeability.yy[c];
    }
    const double count = static_cast<double>(ball.cells.size());
    axx /= count * mu_center;
    axy /= count * mu_center;
    ayy /= count * mu_center;

    // Cutoff data w = p * zeta on the full grid (zero off the ball).
    ScalarField w(g, 0.0);
    for (int c : ball.cells) {
        const int i = c % g.nx, j = c / g.nx;
        const double d = std::hypot((i - ball.ci) * h, (j - ball.cj) * h);
        double zeta = 1.0;
        if (cutoff_radius < R && d > cutoff_radius)
            zeta = std::max(0.0, (R - d) / (R - cutoff_radius));
        w[c] = p[c] * zeta;
    }

    // Unknowns: members whose four neighbors are all members. Everything else
    // (rim members and off-ball cells) carries Dirichlet data w.
    std::vector<char> member(static_cast<size_t>(g.cell_count()), 0);
    for (int c : ball.cells) member[c] = 1;
    std::vector<int> unknown_of(static_cast<size_t>(g.cell_count()), -1);
    std::vector<int> cells;
    for (int c : ball.cells) {
        const int i = c % g.nx, j = c / g.nx;
        const bool interior = i > 0 && i + 1 < g.nx && j > 0 && j + 1 < g.ny &&
                              member[g.lin(i - 1, j)] && member[g.lin(i + 1, j)] &&
                              member[g.lin(i, j - 1)] && member[g.lin(i, j + 1)];
        if (interior) {
            unknown_of[c] = static_cast<int>(cells.size());
            cells.push_back(c);
        }
    }
    if (cells.empty()) throw resolution_error("comparison ball has no interior cells");

    // Nine-point stencil for the constant-coefficient operator, scaled by h^2:
    //   2(axx+ayy) phi_C - axx (E+W) - ayy (N+S) - axy/2 (NE+SW-NW-SE) = 0.
    const int n = static_cast<int>(cells.size());
    MatrixBuilder builder(n);
    std::vector<double> rhs(static_cast<size_t>(n), 0.0);
    const auto couple = [&](int row, int i, int j, double coef) {
        const int c = g.lin(i, j);
        if (unknown_of[c] >= 0)
            builder.add(row, unknown_of[c], coef);
        else
            rhs[row] -= coef * w[c];
    };
    for (int row = 0; row < n; ++row) {
        const int c = cells[row];
        const int i = c % g.nx, j = c / g.nx;
        builder.add(row, row, 2.0 * (axx + ayy));
        couple(row, i - 1, j, -axx);
        couple(row, i + 1, j, -axx);
        couple(row, i, j - 1, -ayy);
        couple(row, i, j + 1, -ayy);
        couple(row, i + 1, j + 1, -0.5 * axy);
        couple(row, i - 1, j - 1, -0.5 * axy);
        couple(row, i + 1, j - 1, 0.5 * axy);
        couple(row, i - 1, j + 1, 0.5 * axy);
    }
    const SparseMatrix A = builder.build();
    std::vector<double> x0(static_cast<size_t>(n));
    for (int row = 0; row < n; ++row) x0[row] = w[cells[row]];
    const SolveResult sol = conjugate_gradient(A, rhs, tol,
                                               std::numeric_limits<double>::infinity(),
                                               max_iter, false, &x0);
    if (!sol.converged)
        throw solver_error("frozen-coefficient comparison solve did not converge", sol.history);

    // Gap: face-difference gradient energy of e = phi - w, which vanishes on
    // rim members and off the ball, so the sum is effectively local.
    ScalarField e(g, 0.0);
    for (int row = 0; row < n; ++row) e[cells[row]] = sol.x[row] - w[cells[row]];
    double gap = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i) {
            const double de = (e.at(i, j) - e.at(i - 1, j)) / h;
            gap += de * de * h * h;
        }
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double de = (e.at(i, j) - e.at(i, j - 1)) / h;
            gap += de * de * h * h;
        }

    FrozenComparison out;
    out.gap = gap;
    out.eta = detail::coefficient_oscillation(u, medium, fluid, ball);
    out.solver_iterations = sol.iterations;
    return out;
}

enum class PointClass { regular, singular, inconclusive };

struct ClassifierThresholds {
    double theta1 = 2.0;         // boundedness: smallest-radius energy vs series median
    double theta2_factor = 0.1;  // coefficient oscillation: smallest vs largest radius
    double theta3 = 1.5;         // blowup: minimum energy growth factor per halving
};

namespace detail {

inline std::vector<std::pair<double, double>> sorted_descending(
    std::vector<std::pair<double, double>> series) {
    std::sort(series.begin(), series.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    return series;
}

}  // namespace detail

/// Heuristic verdict. The series are traversed from the largest radius down,
/// mirroring the limit radius -> 0:
///  - regular: the smallest-radius energy stays within theta1 times the series
///    median, and the smallest-radius coefficient oscillation has dropped
///    below theta2_factor times its largest-radius value;
///  - singular: the energy grows by at least theta3 at every halving;
///  - inconclusive otherwise. Verdicts always ship with the raw series.
inline PointClass classify_point(const std::vector<std::pair<double, double>>& energy_series,
                                 const std::vector<std::pair<double, double>>& eta_series,
                                 const ClassifierThresholds& th = {}) {
    const auto energy = detail::sorted_descending(energy_series);
    if (energy.size() < 3) return PointClass::inconclusive;

    std::vector<double> values;
    values.reserve(energy.size());
    for (const auto& [r, e] : energy) values.push_back(e);
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const size_t mid = sorted.size() / 2;
    const double median =
        sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);

    const bool energy_bounded = values.back() <= th.theta1 * median;
    bool eta_small = false;
    if (!eta_series.empty()) {
        const auto eta = detail::sorted_descending(eta_series);
        eta_small = eta.back().second <= th.theta2_factor * eta.front().second;
    }
    if (energy_bounded && eta_small) return PointClass::regular;

    bool blows_up = true;
    for (size_t k = 0; k + 1 < values.size(); ++k)
        if (!(values[k + 1] >= th.theta3 * values[k])) blows_up = false;
    if (blows_up) return PointClass::singular;
    return PointClass::inconclusive;
}

inline const char* to_string(PointClass c) {
    switch (c) {
        case PointClass::regular: return "regular";
        case PointClass::singular: return "singular";
        case PointClass::inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

/// Full diagnostic record for one space-time query point.
struct RegularityReport {
    int ci = 0;
    int cj = 0;
    int time_index = 0;
    double t0 = 0.0;
    std::vector<std::pair<double, double>> gradient_energy_series;
    std::vector<std::pair<double, double>> osc_series;
    DecayFit alpha_fit;
    std::vector<std::pair<double, double>> eta_series;
    std::vector<std::pair<double, double>> level_set_fractions;
    std::vector<std::pair<double, double>> comparison_gaps;
    ClassifierThresholds thresholds;
    PointClass classification = PointClass::inconclusive;
};

/// Run every diagnostic at one query point. Radii come from the dyadic
/// ladder restricted to positive entries; rungs whose cylinder holds no
/// stored sample, or whose comparison ball leaves the domain or drops below
/// resolution, are skipped rather than reported as failures.
inline RegularityReport diagnose_point(const FieldHistory& p_history,
                                       const FieldHistory& u_history,
                                       const MediumSpec& medium, const FluidSpec& fluid,
                                       int ci, int cj, int time_index,
                                       const std::vector<double>& ladder,
                                       double level_exponent = 3.0,
                                       const ClassifierThresholds& th = {}) {
    if (u_history.size() == 0 || p_history.size() == 0)
        throw config_error("point diagnosis requires nonempty field histories");
    if (time_index < 0) time_index = static_cast<int>(u_history.size()) - 1;
    if (time_index >= static_cast<int>(u_history.size()))
        throw config_error("diagnosis time index is out of range");
    const GridSpec& g = u_history.fields.front().grid;
    if (!g.in_bounds(ci, cj)) throw config_error("diagnosis point is out of bounds");

    RegularityReport report;
    report.ci = ci;
    report.cj = cj;
    report.time_index = time_index;
    report.t0 = u_history.times[static_cast<size_t>(time_index)];
    report.thresholds = th;

    std::vector<double> radii;
    for (double r : ladder)
        if (r > 0.0) radii.push_back(r);
    std::sort(radii.begin(), radii.end());

    report.gradient_energy_series = local_gradient_energy(p_history, ci, cj, radii);

    for (double r : radii) {
        try {
            const auto osc = cylinder_oscillation(u_history, ci, cj, report.t0, {r});
            report.osc_series.push_back(osc.front());
        } catch (const resolution_error&) {
            // window too thin to hold a stored snapshot at this rung
        }
    }
    report.alpha_fit = decay_exponent_fit(report.osc_series);

    const ScalarField& u_now = u_history.fields[static_cast<size_t>(time_index)];
    const ScalarField& p_now = p_history.fields[static_cast<size_t>(time_index)];
    for (double r : radii) {
        const Ball b = make_ball(g, ci, cj, r);
        const LevelSetFraction frac = level_set_fraction(u_now, b, level_exponent);
        if (!frac.degenerate) report.level_set_fractions.emplace_back(r, frac.fraction);
        try {
            const FrozenComparison cmp =
                frozen_coefficient_comparison(p_now, u_now, medium, fluid, b, 0.5 * r);
            report.eta_series.emplace_back(r, cmp.eta);
            report.comparison_gaps.emplace_back(r, cmp.gap);
        } catch (const config_error&) {
            // ball leaves the domain at this rung
        } catch (const resolution_error&) {
            // ball below comparison resolution at this rung
        }
    }

    report.classification =
        classify_point(report.gradient_energy_series, report.eta_series, th);
    return report;
}

}  // namespace mdsim
