#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mdsim/coefficients.hpp"
#include "mdsim/errors.hpp"
#include "mdsim/field.hpp"
#include "mdsim/grid.hpp"
#include "mdsim/snapshot.hpp"

namespace mdsim {

enum class DtPolicy { cfl, fixed };
enum class SourcePattern { none, five_spot };

/// Validated simulation configuration with all defaults filled in.
struct SimulationConfig {
    // grid
    int nx = 32, ny = 32;
    double h = 0.0;  // 0 means 1/nx

    // medium
    double porosity = 1.0;
    double lambda0 = 1e-3;
    double c0 = 1e-6;
    double k_xx = 1.0, k_xy = 0.0, k_yy = 1.0;
    std::string porosity_file, k_xx_file, k_xy_file, k_yy_file;

    // fluid
    FluidSpec fluid;

    // sources
    SourcePattern pattern = SourcePattern::five_spot;
    double rate = 0.2;
    double block_fraction = 0.125;
    double u_hat = 1.0;

    // time
    DtPolicy dt_policy = DtPolicy::cfl;
    double dt_value = 1.0;  // CFL factor or fixed dt
    double t_final = 0.5;
    int snapshot_every = 1;

    // initial state
    double u0 = 0.0;
    std::string u0_file;

    // solvers
    double pressure_tol = 1e-10;
    double transport_tol = 1e-14;
    double picard_tol = 1e-8;
    int pressure_max_iter = 50000;
    int transport_max_iter = 5000;
    int picard_max_iter = 50;
    std::optional<int> k_trunc;  // absent = auto (inactive truncation)
    bool lag_cross_picard = false;

    // diagnostics
    double s_exponent = 3.0;
    double s1_level = 3.0;
    std::vector<double> ell_list{2.0, 4.0};
    double theta1 = 2.0;
    double theta2_factor = 0.1;
    double theta3 = 1.5;

    unsigned seed = 1234;
    bool strict_mode = false;

    GridSpec grid() const {
        GridSpec g;
        g.nx = nx;
        g.ny = ny;
        g.h = h > 0.0 ? h : 1.0 / nx;
        return g;
    }
};

namespace detail {

class KeyValueFile {
  public:
    explicit KeyValueFile(std::istream& in) {
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            std::string key, eq, value;
            std::istringstream ls(line);
            if (!(ls >> key)) continue;
            if (!(ls >> eq) || eq != "=")
                throw config_error("config line " + std::to_string(lineno) +
                                   ": expected 'key = value'");
            std::getline(ls, value);
            const size_t first = value.find_first_not_of(" \t");
            const size_t last = value.find_last_not_of(" \t\r");
            value = first == std::string::npos ? "" : value.substr(first, last - first + 1);
            if (value.empty())
                throw config_error("config line " + std::to_string(lineno) + ": missing value");
            entries_[key] = value;
        }
    }

    std::string str(const std::string& key, const std::string& fallback) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        used_.insert(*it);
        return it->second;
    }

    double num(const std::string& key, double fallback) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        used_.insert(*it);
        char* end = nullptr;
        const double v = std::strtod(it->second.c_str(), &end);
        if (end == it->second.c_str() || *end != '\0')
            throw config_error("config key '" + key + "' has a non-numeric value");
        return v;
    }

    int integer(const std::string& key, int fallback) {
        const double v = num(key, static_cast<double>(fallback));
        if (v != std::floor(v)) throw config_error("config key '" + key + "' must be an integer");
        return static_cast<int>(v);
    }

    void check_all_used() const {
        for (const auto& [k, v] : entries_)
            if (!used_.count({k, v})) throw config_error("unknown config key '" + k + "'");
    }

  private:
    std::map<std::string, std::string> entries_;
    std::set<std::pair<std::string, std::string>> used_;
};

}  // namespace detail

inline SimulationConfig parse_config(std::istream& in) {
    detail::KeyValueFile kv(in);
    SimulationConfig c;

    c.nx = kv.integer("grid.nx", c.nx);
    c.ny = kv.integer("grid.ny", c.ny);
    c.h = kv.num("grid.h", c.h);
    if (c.nx < 3 || c.ny < 3) throw config_error("grid must be at least 3x3");
    if (c.h < 0.0) throw config_error("grid spacing must be positive");

    c.porosity = kv.num("medium.porosity", c.porosity);
    c.lambda0 = kv.num("medium.lambda0", c.lambda0);
    c.c0 = kv.num("medium.c0", c.c0);
    c.k_xx = kv.num("medium.k_xx", c.k_xx);
    c.k_xy = kv.num("medium.k_xy", c.k_xy);
    c.k_yy = kv.num("medium.k_yy", c.k_yy);
    c.porosity_file = kv.str("medium.porosity_file", "");
    c.k_xx_file = kv.str("medium.k_xx_file", "");
    c.k_xy_file = kv.str("medium.k_xy_file", "");
    c.k_yy_file = kv.str("medium.k_yy_file", "");

    c.fluid.m = kv.num("fluid.m", c.fluid.m);
    c.fluid.a = kv.num("fluid.a", c.fluid.a);
    c.fluid.b = kv.num("fluid.b", c.fluid.b);
    const std::string law = kv.str("fluid.viscosity_law", "quarter_power");
    if (law == "quarter_power")
        c.fluid.law = ViscosityLaw::quarter_power;
    else if (law == "constant")
        c.fluid.law = ViscosityLaw::constant;
    else
        throw config_error("fluid.viscosity_law must be quarter_power or constant");
    c.fluid.mu0 = kv.num("fluid.mu0", c.fluid.mu0);
    c.fluid.mobility_ratio = kv.num("fluid.mobility_ratio", c.fluid.mobility_ratio);
    c.fluid.c1 = kv.num("fluid.c1", c.fluid.c1);
    c.fluid.validate();

    const std::string pattern = kv.str("sources.pattern", "five_spot");
    if (pattern == "five_spot")
        c.pattern = SourcePattern::five_spot;
    else if (pattern == "none")
        c.pattern = SourcePattern::none;
    else
        throw config_error("sources.pattern must be five_spot or none");
    c.rate = kv.num("sources.rate", c.rate);
    c.block_fraction = kv.num("sources.block_fraction", c.block_fraction);
    c.u_hat = kv.num("sources.u_hat", c.u_hat);
    if (!(c.rate >= 0.0)) throw config_error("sources.rate must be nonnegative");
    if (!(c.block_fraction > 0.0 && c.block_fraction <= 0.5))
        throw config_error("sources.block_fraction must lie in (0, 0.5]");
    if (!(c.u_hat >= 0.0 && c.u_hat <= 1.0))
        throw config_error("injected concentration must lie in [0, 1]");

    const std::string dt = kv.str("time.dt_policy", "cfl:1.0");
    const size_t colon = dt.find(':');
    const std::string kind = dt.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : dt.substr(colon + 1);
    if (kind == "cfl")
        c.dt_policy = DtPolicy::cfl;
    else if (kind == "fixed")
        c.dt_policy = DtPolicy::fixed;
    else
        throw config_error("time.dt_policy must be cfl:<factor> or fixed:<dt>");
    c.dt_value = arg.empty() ? 1.0 : std::strtod(arg.c_str(), nullptr);
    if (!(c.dt_value > 0.0)) throw config_error("time.dt_policy needs a positive parameter");
    c.t_final = kv.num("time.t_final", c.t_final);
    if (!(c.t_final > 0.0)) throw config_error("time.t_final must be positive");
    c.snapshot_every = kv.integer("time.snapshot_every", c.snapshot_every);
    if (c.snapshot_every < 1) throw config_error("time.snapshot_every must be at least 1");

    c.u0 = kv.num("init.u0", c.u0);
    c.u0_file = kv.str("init.u0_file", "");
    if (!(c.u0 >= 0.0 && c.u0 <= 1.0))
        throw config_error("initial concentration must lie in [0, 1]");

    c.pressure_tol = kv.num("solver.pressure_tol", c.pressure_tol);
    c.transport_tol = kv.num("solver.transport_tol", c.transport_tol);
    c.picard_tol = kv.num("solver.picard_tol", c.picard_tol);
    c.pressure_max_iter = kv.integer("solver.pressure_max_iter", c.pressure_max_iter);
    c.transport_max_iter = kv.integer("solver.transport_max_iter", c.transport_max_iter);
    c.picard_max_iter = kv.integer("solver.picard_max_iter", c.picard_max_iter);
    const std::string ktr = kv.str("solver.k_trunc", "auto");
    if (ktr != "auto") {
        const int k = static_cast<int>(std::strtod(ktr.c_str(), nullptr));
        if (k < 1) throw config_error("solver.k_trunc must be 'auto' or a positive integer");
        c.k_trunc = k;
    }
    c.lag_cross_picard = kv.integer("solver.lag_cross_picard", 0) != 0;

    c.s_exponent = kv.num("diagnostics.s", c.s_exponent);
    if (!(c.s_exponent > 2.0)) throw config_error("diagnostics.s must exceed 2");
    c.s1_level = kv.num("diagnostics.s1", c.s1_level);
    if (!(c.s1_level >= 1.0)) throw config_error("diagnostics.s1 must be at least 1");
    const std::string ells = kv.str("diagnostics.ell", "");
    if (!ells.empty()) {
        c.ell_list.clear();
        std::istringstream es(ells);
        std::string tok;
        while (std::getline(es, tok, ','))
            c.ell_list.push_back(std::strtod(tok.c_str(), nullptr));
        for (double e : c.ell_list)
            if (!(e > 1.0)) throw config_error("diagnostics.ell entries must exceed 1");
    }
    c.theta1 = kv.num("diagnostics.theta1", c.theta1);
    c.theta2_factor = kv.num("diagnostics.theta2_factor", c.theta2_factor);
    c.theta3 = kv.num("diagnostics.theta3", c.theta3);

    c.seed = static_cast<unsigned>(kv.integer("seed", static_cast<int>(c.seed)));
    c.strict_mode = kv.integer("strict", 0) != 0;

    kv.check_all_used();
    return c;
}

inline SimulationConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    return parse_config(in);
}

namespace detail {

inline ScalarField load_or_uniform(const GridSpec& g, const std::string& file, double uniform) {
    if (file.empty()) return ScalarField(g, uniform);
    const Snapshot snap = read_snapshot(file);
    if (snap.field.grid.nx != g.nx || snap.field.grid.ny != g.ny)
        throw config_error("field file grid does not match the configured grid: " + file);
    ScalarField f = snap.field;
    f.grid = g;
    return f;
}

}  // namespace detail

inline MediumSpec build_medium(const SimulationConfig& c) {
    const GridSpec g = c.grid();
    MediumSpec medium;
    medium.porosity = detail::load_or_uniform(g, c.porosity_file, c.porosity);
    medium.permeability = SymTensorField(g, c.k_xx, c.k_xy, c.k_yy);
    if (!c.k_xx_file.empty()) medium.permeability.xx = detail::load_or_uniform(g, c.k_xx_file, 0).v;
    if (!c.k_xy_file.empty()) medium.permeability.xy = detail::load_or_uniform(g, c.k_xy_file, 0).v;
    if (!c.k_yy_file.empty()) medium.permeability.yy = detail::load_or_uniform(g, c.k_yy_file, 0).v;
    medium.lambda0 = c.lambda0;
    medium.c0 = c.c0;
    medium.validate();
    return medium;
}

/// Corner injector / opposite-corner producer with block sizes fixed as a
/// physical fraction of the domain so that refinements describe the same
/// problem. Rates are balanced by construction.
inline SourceSpec build_five_spot(const GridSpec& g, double rate, double block_fraction,
                                  double u_hat) {
    SourceSpec s;
    s.q_inject = ScalarField(g);
    s.q_produce = ScalarField(g);
    s.u_hat = ScalarField(g, u_hat);
    const int nb = std::max(1, static_cast<int>(std::lround(block_fraction * g.nx)));
    const int mb = std::max(1, static_cast<int>(std::lround(block_fraction * g.ny)));
    const double density = rate / (nb * mb * g.h * g.h);
    for (int j = 0; j < mb; ++j)
        for (int i = 0; i < nb; ++i) {
            s.q_inject.at(i, j) = density;
            s.q_produce.at(g.nx - 1 - i, g.ny - 1 - j) = density;
        }
    return s;
}

inline SourceSpec build_sources(const SimulationConfig& c) {
    const GridSpec g = c.grid();
    SourceSpec s;
    if (c.pattern == SourcePattern::five_spot) {
        s = build_five_spot(g, c.rate, c.block_fraction, c.u_hat);
    } else {
        s.q_inject = ScalarField(g);
        s.q_produce = ScalarField(g);
        s.u_hat = ScalarField(g, c.u_hat);
    }
    s.validate();
    auto [qi, qp] = project_compatible_sources(s.q_inject, s.q_produce);
    s.q_inject = std::move(qi);
    s.q_produce = std::move(qp);
    return s;
}

inline ScalarField build_initial_concentration(const SimulationConfig& c) {
    const GridSpec g = c.grid();
    ScalarField u = detail::load_or_uniform(g, c.u0_file, c.u0);
    for (double x : u.v)
        if (!(x >= 0.0 && x <= 1.0))
            throw config_error("initial concentration must lie in [0, 1]");
    return u;
}

}  // namespace mdsim
