#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "mdsim/errors.hpp"
#include "mdsim/field.hpp"

namespace mdsim {

namespace detail {

/// Harmonic mean for face coefficients; zero if either side vanishes.
inline double harmonic(double a, double b) {
    const double s = a + b;
    return s > 0.0 ? 2.0 * a * b / s : 0.0;
}

}  // namespace detail

enum class ViscosityLaw { constant, quarter_power };

/// Fluid data: molecular diffusion m, transverse / longitudinal dispersivities
/// a <= b, and the concentration-dependent viscosity law.
struct FluidSpec {
    double m = 1e-3;
    double a = 1e-2;
    double b = 1e-1;
    ViscosityLaw law = ViscosityLaw::quarter_power;
    double mu0 = 1.0;
    double mobility_ratio = 20.0;
    double c1 = 0.0;  // lower viscosity bound; filled by validate() if zero

    void validate() {
        if (!(m > 0.0)) throw config_error("dispersion requires molecular diffusion m > 0");
        if (!(a > 0.0)) throw config_error("dispersion requires transverse coefficient a > 0");
        if (!(b >= a))
            throw config_error(
                "dispersion requires longitudinal coefficient b >= transverse coefficient a");
        if (!(mu0 > 0.0)) throw config_error("viscosity requires mu0 > 0");
        if (!(mobility_ratio > 0.0)) throw config_error("viscosity requires mobility ratio > 0");
        if (c1 == 0.0) c1 = 0.99 * mu0 / std::max(1.0, mobility_ratio);
        if (!(c1 > 0.0)) throw config_error("viscosity lower bound c1 must be positive");
    }
};

/// Porous medium data: porosity field and symmetric permeability tensor field,
/// with their declared lower bounds.
struct MediumSpec {
    ScalarField porosity;
    SymTensorField permeability;
    double lambda0 = 1e-3;  // porosity lower bound
    double c0 = 1e-6;       // permeability ellipticity bound

    void validate() const {
        if (!(lambda0 > 0.0)) throw config_error("porosity lower bound lambda0 must be positive");
        if (!(c0 > 0.0)) throw config_error("permeability ellipticity bound c0 must be positive");
        for (double p : porosity.v)
            if (!(p >= lambda0))
                throw config_error("porosity falls below its declared lower bound lambda0");
        for (size_t c = 0; c < permeability.xx.size(); ++c) {
            const auto [lo, hi] = permeability.at(static_cast<int>(c)).eigenvalues();
            (void)hi;
            if (!(lo >= c0))
                throw config_error(
                    "permeability eigenvalue falls below its declared ellipticity bound c0");
        }
    }
};

/// Injection / production source densities and injected concentration.
struct SourceSpec {
    ScalarField q_inject;
    ScalarField q_produce;
    ScalarField u_hat;

    void validate() const {
        for (double q : q_inject.v)
            if (!(q >= 0.0)) throw config_error("injection source must be nonnegative");
        for (double q : q_produce.v)
            if (!(q >= 0.0)) throw config_error("production source must be nonnegative");
        for (double u : u_hat.v)
            if (!(u >= 0.0 && u <= 1.0))
                throw config_error("injected concentration must lie in [0, 1]");
    }
};

/// Viscosity of the mixture at concentration u. Inputs outside [0,1] are
/// clamped. The quarter-power law is mu0 * [(1-u) + M^(1/4) u]^(-4), giving
/// mu(0) = mu0 and mu(1) = mu0 / M.
inline double viscosity(double u, const FluidSpec& fluid) {
    u = std::clamp(u, 0.0, 1.0);
    switch (fluid.law) {
        case ViscosityLaw::constant:
            return fluid.mu0;
        case ViscosityLaw::quarter_power: {
            const double mix = (1.0 - u) + std::pow(fluid.mobility_ratio, 0.25) * u;
            return fluid.mu0 / (mix * mix * mix * mix);
        }
    }
    throw config_error("unknown viscosity law");
}

/// Velocity-dependent dispersion tensor
///   D(v) = (m + a|v|) I + (b - a) v v^T / |v|,  D(0) = m I.
/// Eigenvalues: m + b|v| along v, m + a|v| across.
inline SymTensor2 dispersion_tensor(const Vec2& v, const FluidSpec& fluid) {
    const double s = v.norm();
    if (s == 0.0) return {fluid.m, 0.0, fluid.m};
    const double iso = fluid.m + fluid.a * s;
    const double aniso = (fluid.b - fluid.a) / s;
    return {iso + aniso * v.x * v.x, aniso * v.x * v.y, iso + aniso * v.y * v.y};
}

/// Dispersion tensor with the speed truncated at level k:
///   D_k(v) = (a e_k(|v|) + m) I + (b - a) e_k(|v|) v v^T / |v|^2,
/// where e_k(s) = min(s, k). Agrees with dispersion_tensor exactly (bitwise)
/// when |v| <= k; eigenvalues stay in [m, b e_k(|v|) + m] for any v.
inline SymTensor2 truncated_dispersion(const Vec2& v, int k, const FluidSpec& fluid) {
    if (k < 1) throw config_error("truncation level must be a positive integer");
    const double s = v.norm();
    if (s <= static_cast<double>(k)) return dispersion_tensor(v, fluid);
    const double e = static_cast<double>(k);
    const double iso = fluid.m + fluid.a * e;
    const double aniso = (fluid.b - fluid.a) * e / (s * s);
    return {iso + aniso * v.x * v.x, aniso * v.x * v.y, iso + aniso * v.y * v.y};
}

/// Scale q_produce so that the net source integrates to zero, as the
/// pure-Neumann pressure problem requires. Scaling (rather than shifting)
/// preserves nonnegativity.
inline std::pair<ScalarField, ScalarField> project_compatible_sources(const ScalarField& q_inject,
                                                                      const ScalarField& q_produce) {
    const double qi = q_inject.integral();
    const double qp = q_produce.integral();
    if (qi == 0.0 && qp == 0.0) return {q_inject, q_produce};
    if (qi == 0.0 || qp == 0.0)
        throw config_error(
            "source compatibility cannot be restored by scaling: one side integrates to zero");
    ScalarField scaled = q_produce;
    const double factor = qi / qp;
    for (double& q : scaled.v) q *= factor;
    return {q_inject, scaled};
}

}  // namespace mdsim
