#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mdsim/config.hpp"
#include "mdsim/coupling.hpp"
#include "mdsim/errors.hpp"
#include "mdsim/mms.hpp"
#include "mdsim/regularity.hpp"
#include "mdsim/snapshot.hpp"

namespace mdsim {

/// Exit-code contract: 0 success, 1 invariant violation or solver failure,
/// 2 usage or configuration error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitViolation = 1;
inline constexpr int kExitUsage = 2;

namespace cli_detail {

using json = nlohmann::ordered_json;

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ','))
        if (!tok.empty()) out.push_back(tok);
    return out;
}

inline std::string step_name(const char* prefix, int index) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%06d.snap", prefix, index);
    return buf;
}

inline void apply_overrides(SimulationConfig& cfg, int grid_override, double tfinal_override,
                            bool strict) {
    if (grid_override > 0) {
        if (grid_override < 3) throw config_error("grid override must be at least 3");
        cfg.nx = grid_override;
        cfg.ny = grid_override;
        cfg.h = 0.0;  // rederive spacing from the new cell count
    }
    if (tfinal_override > 0.0) cfg.t_final = tfinal_override;
    if (strict) cfg.strict_mode = true;
}

inline void write_run_outputs(const SimulationHistory& hist, const SimulationConfig& cfg,
                              const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const int last = static_cast<int>(hist.times.size()) - 1;
    for (int k = 0; k <= last; ++k) {
        if (k % cfg.snapshot_every != 0 && k != last) continue;
        write_snapshot(hist.u[k], "concentration", hist.times[k],
                       (fs::path(out_dir) / step_name("concentration", k)).string());
        write_snapshot(hist.p[k], "pressure", hist.times[k],
                       (fs::path(out_dir) / step_name("pressure", k)).string());
    }

    json rep;
    rep["grid"] = {{"nx", cfg.nx}, {"ny", cfg.ny}, {"h", cfg.grid().h}};
    rep["t_final"] = cfg.t_final;
    rep["times"] = hist.times;
    rep["mass"] = hist.mass;
    rep["min_u"] = hist.min_u;
    rep["max_u"] = hist.max_u;
    rep["injected_total"] = hist.injected_total;
    rep["produced_total"] = hist.produced_total;
    json picard = json::array();
    for (const PicardState& p : hist.picard)
        picard.push_back({{"iterations", p.iterations},
                          {"converged", p.converged},
                          {"residuals", p.residuals},
                          {"contraction_ratios", p.contraction_ratios},
                          {"k_trunc", p.k_trunc_active}});
    rep["picard"] = std::move(picard);
    json balance = json::array();
    for (const StepBalance& b : hist.balance)
        balance.push_back({{"identity_error_rel", b.identity_error_rel},
                           {"injected", b.injected},
                           {"produced", b.produced}});
    rep["balance"] = std::move(balance);

    MediumSpec medium = build_medium(cfg);
    const EnergyReport energy =
        energy_monitor(hist.concentration_history(), hist.v, medium);
    rep["energy"] = {{"sup_concentration_energy", energy.sup_concentration_energy},
                     {"gradient_dissipation", energy.gradient_dissipation},
                     {"total", energy.total()}};

    std::ofstream out(fs::path(out_dir) / "run_report.json");
    out << rep.dump(2) << "\n";
}

struct CheckResult {
    std::string name;
    bool passed = true;
    std::string detail;
};

inline const std::vector<std::string>& check_names() {
    static const std::vector<std::string> names{
        "max_principle",     "mass_balance",      "zero_mean_pressure",
        "conservation",      "dispersion_bounds", "source_compatibility"};
    return names;
}

/// Run the simulation for the config and evaluate the enabled invariant
/// checks on its history. `fault` names a check whose input data is corrupted
/// first; that hook exists so tests can prove each check actually detects its
/// violation.
inline std::vector<CheckResult> run_verification(const SimulationConfig& cfg,
                                                 const std::set<std::string>& enabled,
                                                 const std::string& fault) {
    SimulationHistory hist = run_simulation(cfg);
    const GridSpec g = cfg.grid();
    MediumSpec medium = build_medium(cfg);
    FluidSpec fluid = cfg.fluid;
    SourceSpec sources = build_sources(cfg);

    if (fault == "max_principle") hist.u.back().v[hist.u.back().v.size() / 2] = 1.0 + 1e-6;
    if (fault == "mass_balance") hist.mass.back() += 1e-6;
    if (fault == "zero_mean_pressure")
        for (double& p : hist.p.back().v) p += 1e-6;
    if (fault == "conservation") {
        auto& fx = hist.v.back().fx;
        size_t worst = 0;
        for (size_t k = 0; k < fx.size(); ++k)
            if (std::abs(fx[k]) > std::abs(fx[worst])) worst = k;
        fx[worst] += 1e-6 * (1.0 + std::abs(fx[worst]));
    }
    if (fault == "dispersion_bounds") fluid.b = 0.5 * fluid.a;
    if (fault == "source_compatibility") sources.q_inject[0] += 1.0;

    std::vector<CheckResult> results;
    const auto run_check = [&](const std::string& name, auto&& body) {
        if (!enabled.count(name)) return;
        CheckResult r;
        r.name = name;
        body(r);
        results.push_back(std::move(r));
    };
    char buf[160];

    run_check("max_principle", [&](CheckResult& r) {
        double lo = 0.0, hi = 1.0;
        for (const ScalarField& u : hist.u) {
            lo = std::min(lo, u.min());
            hi = std::max(hi, u.max());
        }
        r.passed = lo >= -1e-12 && hi <= 1.0 + 1e-12;
        std::snprintf(buf, sizeof(buf), "concentration range [%.3e, 1 + %.3e]", lo, hi - 1.0);
        r.detail = buf;
    });

    run_check("mass_balance", [&](CheckResult& r) {
        double worst = 0.0;
        for (const StepBalance& b : hist.balance)
            worst = std::max(worst, b.identity_error_rel);
        const double net = hist.injected_total - hist.produced_total;
        const double defect = hist.mass.back() - hist.mass.front() - net;
        const double scale = std::max(
            {std::abs(hist.mass.front()), std::abs(hist.mass.back()), std::abs(net), 1e-300});
        const double cumulative = std::abs(defect) / scale;
        r.passed = worst <= 1e-12 && cumulative <= 1e-10;
        std::snprintf(buf, sizeof(buf), "per-step defect %.3e, cumulative %.3e", worst,
                      cumulative);
        r.detail = buf;
    });

    run_check("zero_mean_pressure", [&](CheckResult& r) {
        double worst = 0.0;
        for (const ScalarField& p : hist.p) worst = std::max(worst, std::abs(p.mean()));
        r.passed = worst <= 1e-10 * g.area();
        std::snprintf(buf, sizeof(buf), "max |mean pressure| = %.3e", worst);
        r.detail = buf;
    });

    run_check("conservation", [&](CheckResult& r) {
        double worst = 0.0;
        for (const FluxField& v : hist.v) {
            const ScalarField div = divergence(v);
            for (int c = 0; c < g.cell_count(); ++c)
                worst = std::max(worst,
                                 std::abs(div[c] - (sources.q_inject[c] - sources.q_produce[c])));
        }
        r.passed = worst <= 10.0 * cfg.pressure_tol;
        std::snprintf(buf, sizeof(buf), "max |div v - net source| = %.3e (budget %.3e)", worst,
                      10.0 * cfg.pressure_tol);
        r.detail = buf;
    });

    run_check("dispersion_bounds", [&](CheckResult& r) {
        double worst = 0.0;
        for (const FluxField& v : hist.v) {
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) {
                    const Vec2 vc = v.cell_velocity(i, j);
                    const double s = vc.norm();
                    const auto [lo, hi] = dispersion_tensor(vc, fluid).eigenvalues();
                    const double lo_bound = fluid.m + fluid.a * s;
                    const double hi_bound = fluid.m + fluid.b * s;
                    worst = std::max(worst, (lo_bound - lo) / (1.0 + lo_bound));
                    worst = std::max(worst, (hi - hi_bound) / (1.0 + hi_bound));
                }
        }
        r.passed = worst <= 1e-12;
        std::snprintf(buf, sizeof(buf), "max relative sandwich violation %.3e", worst);
        r.detail = buf;
    });

    run_check("source_compatibility", [&](CheckResult& r) {
        ScalarField net = sources.q_inject;
        for (size_t c = 0; c < net.v.size(); ++c) net.v[c] -= sources.q_produce.v[c];
        const double defect = std::abs(net.integral());
        r.passed = defect <= 1e-10 * g.area();
        std::snprintf(buf, sizeof(buf), "|integral of net source| = %.3e", defect);
        r.detail = buf;
    });

    return results;
}

/// File-based verification: range checks on stored concentration snapshots
/// and mean checks on stored pressure snapshots. Checksums are validated by
/// the reader itself.
inline std::vector<CheckResult> verify_snapshot_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw config_error("snapshot directory does not exist: " + dir);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".snap") files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw config_error("snapshot directory holds no .snap files: " + dir);

    CheckResult maxp{"max_principle", true, ""};
    CheckResult zerop{"zero_mean_pressure", true, ""};
    double lo = 0.0, hi = 1.0, worst_mean = 0.0;
    int n_conc = 0, n_pres = 0;
    for (const std::string& f : files) {
        const Snapshot snap = read_snapshot(f);
        if (snap.name == "concentration") {
            lo = std::min(lo, snap.field.min());
            hi = std::max(hi, snap.field.max());
            ++n_conc;
        } else if (snap.name == "pressure") {
            worst_mean = std::max(worst_mean, std::abs(snap.field.mean()));
            ++n_pres;
        }
    }
    char buf[160];
    maxp.passed = lo >= -1e-12 && hi <= 1.0 + 1e-12;
    std::snprintf(buf, sizeof(buf), "%d files, range [%.3e, 1 + %.3e]", n_conc, lo, hi - 1.0);
    maxp.detail = buf;
    zerop.passed = worst_mean <= 1e-10;
    std::snprintf(buf, sizeof(buf), "%d files, max |mean| = %.3e", n_pres, worst_mean);
    zerop.detail = buf;
    std::vector<CheckResult> out;
    if (n_conc > 0) out.push_back(maxp);
    if (n_pres > 0) out.push_back(zerop);
    return out;
}

inline json series_json(const std::vector<std::pair<double, double>>& series) {
    json arr = json::array();
    for (const auto& [r, v] : series) arr.push_back({r, v});
    return arr;
}

inline json report_json(const RegularityReport& rep) {
    json j;
    j["point"] = {{"i", rep.ci}, {"j", rep.cj}, {"time_index", rep.time_index}, {"t0", rep.t0}};
    j["gradient_energy_series"] = series_json(rep.gradient_energy_series);
    j["osc_series"] = series_json(rep.osc_series);
    j["alpha_fit"] = {{"alpha", rep.alpha_fit.alpha},
                      {"rms_residual", rep.alpha_fit.rms_residual},
                      {"conclusive", rep.alpha_fit.conclusive}};
    j["eta_series"] = series_json(rep.eta_series);
    j["level_set_fractions"] = series_json(rep.level_set_fractions);
    j["comparison_gaps"] = series_json(rep.comparison_gaps);
    j["thresholds"] = {{"theta1", rep.thresholds.theta1},
                       {"theta2_factor", rep.thresholds.theta2_factor},
                       {"theta3", rep.thresholds.theta3}};
    j["classification"] = to_string(rep.classification);
    return j;
}

}  // namespace cli_detail

/// Entry point behind main(); also the seam the test-suite drives.
inline int execute_command(int argc, const char* const* argv) {
    using cli_detail::json;
    CLI::App app{"finite-volume miscible displacement simulator with regularity diagnostics"};
    app.require_subcommand(1);

    std::string config_path, out_dir, grid_list, point_spec, ladder_spec, checks_spec, fault,
        snapshot_dir;
    int grid_override = 0;
    double tfinal_override = 0.0;
    bool strict = false;

    CLI::App* cmd_run = app.add_subcommand("run", "advance the coupled system, write snapshots");
    cmd_run->add_option("--config", config_path, "configuration file")->required();
    cmd_run->add_option("--out", out_dir, "output directory for snapshots and the run report");
    cmd_run->add_option("--grid", grid_override, "override the grid to N x N");
    cmd_run->add_option("--tfinal", tfinal_override, "override the final time");
    cmd_run->add_flag("--strict", strict, "fail hard when an iteration cap is hit");

    CLI::App* cmd_verify = app.add_subcommand("verify", "run the invariant-monitor suite");
    cmd_verify->add_option("--config", config_path, "configuration file");
    cmd_verify->add_option("--snapshots", snapshot_dir,
                           "verify stored snapshot files instead of a fresh run");
    cmd_verify->add_option("--grid", grid_override, "override the grid to N x N");
    cmd_verify->add_option("--tfinal", tfinal_override, "override the final time");
    cmd_verify->add_option("--checks", checks_spec, "comma list of checks to run (default all)");
    cmd_verify->add_option("--inject-fault", fault,
                           "test hook: corrupt the named check's data before checking");
    cmd_verify->add_flag("--strict", strict, "fail hard when an iteration cap is hit");

    CLI::App* cmd_mms = app.add_subcommand("mms", "manufactured-solution convergence study");
    cmd_mms->add_option("--grid", grid_list, "comma list of grid sizes (default 16,32,64)");
    cmd_mms->add_option("--out", out_dir, "output directory for the study report");

    CLI::App* cmd_diag = app.add_subcommand("diagnose", "point regularity diagnostics");
    cmd_diag->add_option("--config", config_path, "configuration file")->required();
    cmd_diag->add_option("--point", point_spec, "query point as i,j,<time index|last>")
        ->required();
    cmd_diag->add_option("--ladder", ladder_spec, "comma list of radii (default dyadic ladder)");
    cmd_diag->add_option("--out", out_dir, "output directory for the report");
    cmd_diag->add_option("--grid", grid_override, "override the grid to N x N");
    cmd_diag->add_option("--tfinal", tfinal_override, "override the final time");
    cmd_diag->add_flag("--strict", strict, "fail hard when an iteration cap is hit");

    try {
        app.parse(argc, const_cast<char**>(argv));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (cmd_run->parsed()) {
            SimulationConfig cfg = load_config(config_path);
            cli_detail::apply_overrides(cfg, grid_override, tfinal_override, strict);
            const SimulationHistory hist = run_simulation(cfg);
            if (!out_dir.empty()) cli_detail::write_run_outputs(hist, cfg, out_dir);
            double lo = 1.0, hi = 0.0;
            for (size_t k = 0; k < hist.min_u.size(); ++k) {
                lo = std::min(lo, hist.min_u[k]);
                hi = std::max(hi, hist.max_u[k]);
            }
            std::cout << "steps: " << hist.times.size() - 1 << "  final time: " << hist.times.back()
                      << "\n"
                      << "final mass: " << hist.mass.back() << "  concentration range: [" << lo
                      << ", " << hi << "]\n";
            return kExitOk;
        }

        if (cmd_verify->parsed()) {
            std::vector<cli_detail::CheckResult> results;
            if (!snapshot_dir.empty()) {
                results = cli_detail::verify_snapshot_dir(snapshot_dir);
            } else {
                if (config_path.empty())
                    throw config_error("verify needs --config or --snapshots");
                std::set<std::string> enabled(cli_detail::check_names().begin(),
                                              cli_detail::check_names().end());
                if (!checks_spec.empty()) {
                    enabled.clear();
                    for (const std::string& name : cli_detail::split_list(checks_spec)) {
                        if (std::find(cli_detail::check_names().begin(),
                                      cli_detail::check_names().end(),
                                      name) == cli_detail::check_names().end())
                            throw config_error("unknown check name: " + name);
                        enabled.insert(name);
                    }
                }
                if (!fault.empty() && fault != "none" &&
                    std::find(cli_detail::check_names().begin(), cli_detail::check_names().end(),
                              fault) == cli_detail::check_names().end())
                    throw config_error("unknown fault name: " + fault);
                SimulationConfig cfg = load_config(config_path);
                cli_detail::apply_overrides(cfg, grid_override, tfinal_override, strict);
                results = cli_detail::run_verification(cfg, enabled, fault);
            }
            bool all_ok = true;
            for (const cli_detail::CheckResult& r : results) {
                std::cout << (r.passed ? "ok   " : "FAIL ") << r.name << ": " << r.detail << "\n";
                all_ok = all_ok && r.passed;
            }
            return all_ok ? kExitOk : kExitViolation;
        }

        if (cmd_mms->parsed()) {
            std::vector<int> grids{16, 32, 64};
            if (!grid_list.empty()) {
                grids.clear();
                for (const std::string& tok : cli_detail::split_list(grid_list))
                    grids.push_back(std::stoi(tok));
            }
            const std::vector<mms::MmsRow> rows = mms::mms_convergence_study(grids);
            std::printf("%6s  %14s  %7s  %14s  %7s\n", "n", "pressure_L2", "order",
                        "transport_L2", "order");
            for (const mms::MmsRow& r : rows) {
                if (r.has_order)
                    std::printf("%6d  %14.6e  %7.3f  %14.6e  %7.3f\n", r.n, r.pressure_error,
                                r.pressure_order, r.transport_error, r.transport_order);
                else
                    std::printf("%6d  %14.6e  %7s  %14.6e  %7s\n", r.n, r.pressure_error, "-",
                                r.transport_error, "-");
            }
            if (!out_dir.empty()) {
                namespace fs = std::filesystem;
                fs::create_directories(out_dir);
                json j = json::array();
                for (const mms::MmsRow& r : rows) {
                    json row = {{"n", r.n},
                                {"pressure_error", r.pressure_error},
                                {"transport_error", r.transport_error}};
                    if (r.has_order) {
                        row["pressure_order"] = r.pressure_order;
                        row["transport_order"] = r.transport_order;
                    }
                    j.push_back(std::move(row));
                }
                std::ofstream out(fs::path(out_dir) / "mms_report.json");
                out << j.dump(2) << "\n";
            }
            return kExitOk;
        }

        if (cmd_diag->parsed()) {
            SimulationConfig cfg = load_config(config_path);
            cli_detail::apply_overrides(cfg, grid_override, tfinal_override, strict);
            const std::vector<std::string> parts = cli_detail::split_list(point_spec);
            if (parts.size() != 3)
                throw config_error("--point expects i,j,<time index|last>");
            const int ci = std::stoi(parts[0]);
            const int cj = std::stoi(parts[1]);
            const int tindex = parts[2] == "last" ? -1 : std::stoi(parts[2]);

            const SimulationHistory hist = run_simulation(cfg);
            const MediumSpec medium = build_medium(cfg);
            std::vector<double> ladder;
            if (!ladder_spec.empty())
                for (const std::string& tok : cli_detail::split_list(ladder_spec))
                    ladder.push_back(std::stod(tok));
            else
                ladder = dyadic_ladder(cfg.grid());

            ClassifierThresholds th{cfg.theta1, cfg.theta2_factor, cfg.theta3};
            const RegularityReport rep =
                diagnose_point(hist.pressure_history(), hist.concentration_history(), medium,
                               cfg.fluid, ci, cj, tindex, ladder, cfg.s1_level, th);

            std::cout << "point (" << rep.ci << ", " << rep.cj << ")  time index "
                      << rep.time_index << "  t = " << rep.t0 << "\n"
                      << "classification: " << to_string(rep.classification) << "\n"
                      << "decay exponent: "
                      << (rep.alpha_fit.conclusive ? std::to_string(rep.alpha_fit.alpha)
                                                   : std::string("inconclusive"))
                      << "\n"
                      << "series lengths: energy " << rep.gradient_energy_series.size()
                      << ", oscillation " << rep.osc_series.size() << ", coefficient "
                      << rep.eta_series.size() << ", comparison " << rep.comparison_gaps.size()
                      << "\n";
            if (!out_dir.empty()) {
                namespace fs = std::filesystem;
                fs::create_directories(out_dir);
                char name[64];
                std::snprintf(name, sizeof(name), "diagnose_%d_%d.json", rep.ci, rep.cj);
                std::ofstream out(fs::path(out_dir) / name);
                out << cli_detail::report_json(rep).dump(2) << "\n";
            }
            return kExitOk;
        }
    } catch (const config_error& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const resolution_error& e) {
        std::cerr << "resolution error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const solver_error& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitViolation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitViolation;
    }
    return kExitUsage;
}

/// Convenience overload for driving the CLI from tests.
inline int execute_command(const std::vector<std::string>& args) {
    std::vector<std::string> full;
    full.reserve(args.size() + 1);
    full.push_back("mdsim");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(full.size());
    for (const std::string& s : full) argv.push_back(s.c_str());
    return execute_command(static_cast<int>(argv.size()), argv.data());
}

}  // namespace mdsim
