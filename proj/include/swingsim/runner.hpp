#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "swingsim/dispatch.hpp"
#include "swingsim/errors.hpp"
#include "swingsim/fidelity.hpp"
#include "swingsim/scenario_io.hpp"
#include "swingsim/simulator.hpp"

namespace swingsim {

struct EquilibriumComparison {
    Equilibrium predicted;
    double omega_residual = 0.0;
    double chi_residual = 0.0;
    std::vector<double> upsilon_residual;
    double max_upsilon_residual = 0.0;
};

struct OptimalityComparison {
    OptimalDispatch analytic;
    bool xi_is_optimal = false;           // scenario xi equals xi_opt
    double max_xi_gap = 0.0;
    double max_upsilon_gap = 0.0;         // terminal injections vs optimum
};

struct RunReport {
    std::string scenario_name;
    std::size_t sample_count = 0;
    double t_end = 0.0;

    bool steady_available = false;
    SteadyState steady;

    EquilibriumComparison equilibrium;
    MonotonicityReport lyapunov;
    double conservation_residual = 0.0;
    double wdot_tolerance = 0.0;
    ProportionalityReport proportionality;
    std::optional<OptimalityComparison> optimality;
    std::optional<FidelityGapReport> fidelity;

    bool conservation_ok = false;
    bool lyapunov_ok = false;
    bool wdot_ok = false;
    bool proportionality_ok = true;
    bool all_checks_pass = false;

    double wall_seconds = 0.0;
};

inline constexpr double kConservationTolerance = 1e-12;

namespace detail {

/// Heuristic ceiling for the central-difference Lyapunov-rate residual:
/// spacing^2 * (closed-loop rate bound)^3 / 6 scaled by the peak W seen.
[[nodiscard]] inline double wdot_residual_ceiling(const ControllerConfig& cfg,
                                                  const GeneratorSpec& gen,
                                                  const Trajectory& traj) {
    double spacing = 0.0;
    for (std::size_t k = 1; k < traj.sample_count(); ++k) {
        spacing = std::max(spacing, traj.time[k] - traj.time[k - 1]);
    }
    const double rate =
        2.0 * (gen.damping + cfg.gamma + cfg.alpha + cfg.beta) / gen.inertia + 2.0;
    double w_peak = 0.0;
    for (double w : traj.lyapunov) {
        w_peak = std::max(w_peak, w);
    }
    return spacing * spacing * rate * rate * rate / 6.0 * std::max(w_peak, 1e-3);
}

}  // namespace detail

/// Executes the full check pipeline on an already-parsed scenario:
/// integration, steady-state extraction, closed-form equilibrium residuals,
/// Lyapunov monotonicity, conservation, proportionality, and (when costs are
/// given) the comparison against the cost-optimal dispatch.
[[nodiscard]] inline RunReport run_scenario(const Scenario& scn, Trajectory* out_traj = nullptr) {
    const auto t_start = std::chrono::steady_clock::now();
    const PreparedScenario prep = prepare_scenario(scn);
    const Network& net = prep.network;
    const ControllerConfig& cfg = prep.controller;
    const GeneratorSpec& gen = net.generator();

    RunReport report;
    report.scenario_name = scn.name;
    report.t_end = scn.integrator.t_end;

    Trajectory traj = integrate(scn, prep);
    report.sample_count = traj.sample_count();

    const TrajectorySegment& final_segment = traj.segments.back();
    const std::size_t last = traj.sample_count() - 1;

    // Closed-form equilibrium of the final input regime vs the simulated tail.
    ControllerConfig cfg_final = cfg;
    cfg_final.u_bar = final_segment.u_bar_end;
    report.equilibrium.predicted =
        closed_loop_equilibrium(cfg_final, final_segment.sum_delta, gen.damping);
    report.equilibrium.omega_residual =
        std::abs(traj.omega[last] - report.equilibrium.predicted.omega_bar);
    report.equilibrium.chi_residual =
        (cfg.mode == ControllerMode::Proportional)
            ? 0.0
            : std::abs(traj.chi[last] - report.equilibrium.predicted.chi_bar);
    report.equilibrium.upsilon_residual.resize(net.inverter_count());
    for (std::size_t i = 0; i < net.inverter_count(); ++i) {
        report.equilibrium.upsilon_residual[i] =
            std::abs(traj.upsilon[i][last] - report.equilibrium.predicted.upsilon_bar[i]);
        report.equilibrium.max_upsilon_residual =
            std::max(report.equilibrium.max_upsilon_residual,
                     report.equilibrium.upsilon_residual[i]);
    }

    if (!final_segment.ramp_active) {
        const double tail = traj.time.back() - final_segment.t_begin;
        const double window = std::min(2.0, tail);
        if (window > 0.0) {
            report.steady = steady_state_extract(traj, window);
            report.steady_available = true;
        }
    }

    report.lyapunov = check_lyapunov(traj, cfg, gen.inertia, gen.damping);
    report.lyapunov_ok = report.lyapunov.total_violations == 0;

    report.conservation_residual = max_conservation_residual(traj);
    report.conservation_ok = report.conservation_residual < kConservationTolerance;

    report.wdot_tolerance = detail::wdot_residual_ceiling(cfg, gen, traj);
    report.wdot_ok = report.lyapunov.max_wdot_residual <= report.wdot_tolerance;

    std::vector<double> upsilon_terminal(net.inverter_count());
    for (std::size_t i = 0; i < net.inverter_count(); ++i) {
        upsilon_terminal[i] = traj.upsilon[i][last];
    }
    report.proportionality = proportionality_report(
        net.inverter_nominal(), upsilon_terminal, cfg.xi, gen.nominal_power, traj.u[last],
        traj.v[last], cfg.alpha, cfg.beta);
    if (report.proportionality.pairwise_applicable && !report.proportionality.pairwise_ok) {
        report.proportionality_ok = false;
    }
    // The generator/inverter split is a steady-state claim; only gate on it
    // once the run has actually settled.
    const bool settled = report.steady_available && report.steady.omega_max_dev < 1e-6;
    if (settled && report.proportionality.generator_applicable &&
        report.proportionality.generator_premise_holds && !report.proportionality.generator_ok) {
        report.proportionality_ok = false;
    }

    if (scn.costs) {
        OptimalityComparison cmp;
        cmp.analytic = optimal_injection(*scn.costs, final_segment.u_bar_end,
                                         final_segment.sum_delta);
        if (cmp.analytic.xi_opt.size() == cfg.xi.size()) {
            cmp.max_xi_gap = 0.0;
            for (std::size_t i = 0; i < cfg.xi.size(); ++i) {
                cmp.max_xi_gap = std::max(cmp.max_xi_gap,
                                          std::abs(cfg.xi[i] - cmp.analytic.xi_opt[i]));
            }
            cmp.xi_is_optimal = cmp.max_xi_gap <= 1e-9;
            for (std::size_t i = 0; i < cfg.xi.size(); ++i) {
                cmp.max_upsilon_gap =
                    std::max(cmp.max_upsilon_gap,
                             std::abs(upsilon_terminal[i] - cmp.analytic.upsilon_bar[i]));
            }
        }
        report.optimality = std::move(cmp);
    }

    if (scn.device) {
        const double tail = traj.time.back() - final_segment.t_begin;
        const double margin = std::min(3.0, 0.5 * tail);
        if (margin > 0.0) {
            report.fidelity = fidelity_gap(scn, *scn.device, margin);
        }
    }

    report.all_checks_pass = report.conservation_ok && report.lyapunov_ok && report.wdot_ok &&
                             report.proportionality_ok;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    if (out_traj != nullptr) {
        *out_traj = std::move(traj);
    }
    return report;
}

[[nodiscard]] inline std::string render_report(const RunReport& report) {
    std::ostringstream out;
    const auto flag = [](bool ok) { return ok ? "ok" : "FAIL"; };
    out.precision(12);
    out << "scenario: " << report.scenario_name << "\n";
    out << "samples: " << report.sample_count << "  t_end: " << report.t_end
        << "  wall: " << report.wall_seconds << " s\n";
    out << "\n[equilibrium]\n";
    out << "  predicted omega_bar = " << report.equilibrium.predicted.omega_bar
        << ", chi_bar = " << report.equilibrium.predicted.chi_bar
        << ", v_bar = " << report.equilibrium.predicted.v_bar << "\n";
    out << "  residual |omega - omega_bar| = " << report.equilibrium.omega_residual << "\n";
    out << "  residual |chi - chi_bar|     = " << report.equilibrium.chi_residual << "\n";
    out << "  residual max |Y - Y_bar|     = " << report.equilibrium.max_upsilon_residual << "\n";
    if (report.steady_available) {
        out << "\n[steady state, trailing " << (report.t_end - report.steady.window_begin)
            << " s]\n";
        out << "  omega mean = " << report.steady.omega_mean
            << " (max dev " << report.steady.omega_max_dev << ")\n";
        out << "  u mean = " << report.steady.u_mean << ", v mean = " << report.steady.v_mean
            << "\n";
        out << "  upsilon mean =";
        for (double y : report.steady.upsilon_mean) {
            out << " " << y;
        }
        out << " (max dev " << report.steady.upsilon_max_dev << ")\n";
    }
    out << "\n[checks]\n";
    out << "  conservation residual = " << report.conservation_residual << " ["
        << flag(report.conservation_ok) << "]\n";
    out << "  lyapunov violations = " << report.lyapunov.total_violations << " (max increment "
        << report.lyapunov.max_positive_increment << ") [" << flag(report.lyapunov_ok) << "]\n";
    out << "  wdot residual = " << report.lyapunov.max_wdot_residual << " (ceiling "
        << report.wdot_tolerance << ") [" << flag(report.wdot_ok) << "]\n";
    if (report.proportionality.pairwise_applicable) {
        out << "\n[sharing ratios]\n";
        for (const RatioEntry& entry : report.proportionality.pairwise) {
            out << "  (P*_" << entry.i + 1 << "+Y_" << entry.i + 1 << ")/(P*_" << entry.j + 1
                << "+Y_" << entry.j + 1 << ") = " << entry.power_ratio << " vs xi ratio "
                << entry.xi_ratio << " (rel mismatch " << entry.relative_mismatch << ")\n";
        }
        out << "  [" << flag(report.proportionality.pairwise_ok) << "]\n";
    }
    if (report.proportionality.generator_applicable) {
        out << "  generator/inverters total ratio = " << report.proportionality.generator_ratio
            << " vs alpha/beta = " << report.proportionality.alpha_beta_ratio << "\n";
    }
    if (report.optimality) {
        out << "\n[optimal dispatch]\n";
        out << "  xi_opt =";
        for (double x : report.optimality->analytic.xi_opt) {
            out << " " << x;
        }
        out << "\n  scenario xi is " << (report.optimality->xi_is_optimal ? "" : "NOT ")
            << "cost-optimal (max gap " << report.optimality->max_xi_gap << ")\n";
        out << "  optimal injections =";
        for (double y : report.optimality->analytic.upsilon_bar) {
            out << " " << y;
        }
        out << "\n  terminal injection gap = " << report.optimality->max_upsilon_gap
            << "\n  mu = " << report.optimality->analytic.mu
            << ", cost = " << report.optimality->analytic.cost << "\n";
    }
    if (report.fidelity) {
        out << "\n[device tier]\n";
        out << "  max power gap vs ideal = " << report.fidelity->max_gap << "\n";
        out << "  post-transient gap (t >= " << report.fidelity->post_transient_begin
            << ") = " << report.fidelity->post_transient_gap << "\n";
    }
    out << "\nresult: " << (report.all_checks_pass ? "all checks passed" : "CHECKS FAILED")
        << "\n";
    return out.str();
}

/// Parses, runs, and writes trajectory.csv plus report.txt into out_dir.
/// Nothing is written if parsing, validation, or integration fails.
[[nodiscard]] inline RunReport run(const std::filesystem::path& scenario_path,
                                   const std::filesystem::path& out_dir) {
    const Scenario scn = parse_scenario(scenario_path);
    Trajectory traj;
    RunReport report = run_scenario(scn, &traj);

    std::filesystem::create_directories(out_dir);
    write_trajectory_csv(traj, out_dir / "trajectory.csv");
    std::ofstream report_file(out_dir / "report.txt");
    if (!report_file) {
        throw Error(ErrorCode::IoError, "cannot write report to '" + out_dir.string() + "'");
    }
    report_file << render_report(report);
    return report;
}

// ---------------------------------------------------------------------------
// Built-in reference experiment: one synchronous generator and two inverters
// in series, a +0.5 pu load step at t = 0 removed at t = 5.

struct PaperOverrides {
    std::optional<double> beta;
    std::optional<std::vector<double>> xi;
};

struct PaperAssertion {
    std::string name;
    bool passed = false;
    double measured = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

struct PaperReport {
    Scenario scenario;
    RunReport run;
    std::vector<PaperAssertion> assertions;
    bool all_passed = false;
    std::string note;
};

/// The reference scenario. The source experiment lists M = 0.1, D = 0.05,
/// gamma = 0.15, beta = 1.5, xi = (1/3, 2/3), line reactance 0.12, a +0.5 pu
/// load step at t = 0 removed at t = 5, and nominal powers P_G* = 1,
/// P_I* = 1.5, P_L* = 5.5 with a constant generator input of 3. Those nominal
/// powers cannot satisfy the power balance under any reading, so the run
/// uses the balance-consistent equivalent (P_L* = 4, u_bar = 0), which has
/// the identical reduced closed loop; the raw published values are kept in
/// the run note.
[[nodiscard]] inline Scenario reference_scenario(const PaperOverrides& overrides = {}) {
    Scenario scn;
    scn.name = "paper-reproduction";
    scn.network.nodes = {
        GeneratorSpec{"sg", 0.1, 0.05, 1.0},
        InverterSpec{"inv1", 1.5},
        InverterSpec{"inv2", 1.5},
        LoadSpec{"load1", 4.0},
    };
    scn.network.edges = {
        EdgeSpec{"sg", "inv1", 0.12},
        EdgeSpec{"inv1", "inv2", 0.12},
        EdgeSpec{"inv2", "load1", 0.12},
    };
    scn.controller.mode = ControllerMode::ConstantInputPi;
    scn.controller.u_bar = 0.0;
    scn.controller.beta = overrides.beta.value_or(1.5);
    scn.controller.gamma = 0.15;
    scn.controller.xi = overrides.xi.value_or(std::vector<double>{1.0 / 3.0, 2.0 / 3.0});

    scn.events = {
        Event{0.0, EventKind::LoadStep, "load1", 0.5, 0.0, 0.0},
        Event{5.0, EventKind::LoadStep, "load1", 0.0, 0.0, 0.0},
    };
    scn.integrator.t_end = 20.0;
    scn.integrator.step = 1e-3;
    scn.integrator.record_stride = 1;
    return scn;
}

/// Runs the reference experiment and asserts its three headline claims:
/// the frequency is restored after both load events, the inverters hold the
/// xi-proportional sharing ratio while loaded, and the injections return to
/// their pre-step values after the load is relieved.
[[nodiscard]] inline PaperReport reproduce_paper(const PaperOverrides& overrides = {}) {
    PaperReport paper;
    paper.scenario = reference_scenario(overrides);
    paper.note =
        "reference parameter set: M=0.1 D=0.05 gamma=0.15 beta=1.5 xi=(1/3,2/3) X=0.12, "
        "P_G*=1 P_I*=1.5 P_L*=5.5 u=3; those nominal powers do not balance, so the run "
        "uses the balance-consistent equivalent P_L*=4, u_bar=0 (identical reduced "
        "closed loop).";

    Trajectory traj;
    paper.run = run_scenario(paper.scenario, &traj);

    const PreparedScenario prep = prepare_scenario(paper.scenario);
    const bool proportional = prep.controller.mode == ControllerMode::Proportional;
    const double sum_delta_loaded = 0.5;

    // Sample at t = 5 carries the pre-relief state.
    std::size_t at_step = traj.sample_count();
    for (std::size_t k = 0; k < traj.sample_count(); ++k) {
        if (traj.time[k] == 5.0) {
            at_step = k;
            break;
        }
    }
    if (at_step == traj.sample_count()) {
        throw Error(ErrorCode::AssertionFailure, "no sample at the load-relief time");
    }
    const std::size_t last = traj.sample_count() - 1;

    {
        PaperAssertion a;
        a.name = "frequency-restoration";
        if (!proportional) {
            const double mid = std::abs(traj.omega[at_step]);
            a.measured = std::abs(traj.omega[last]);
            a.tolerance = 1e-6;
            a.passed = mid < 2e-2 && a.measured < a.tolerance;
            std::ostringstream detail;
            detail << "|omega| = " << mid << " at relief (< 2e-2), " << a.measured
                   << " at t_end";
            a.detail = detail.str();
        } else {
            // Without integral action the loaded frequency settles at the
            // droop offset instead of returning to zero.
            const Equilibrium loaded = closed_loop_equilibrium(
                prep.controller, sum_delta_loaded, prep.network.generator().damping);
            a.measured = traj.omega[at_step];
            a.tolerance = 1e-3;
            a.passed = std::abs(a.measured - loaded.omega_bar) < a.tolerance &&
                       std::abs(loaded.omega_bar) > 1e-3;
            std::ostringstream detail;
            detail << "loaded omega settles at " << a.measured << ", droop offset "
                   << loaded.omega_bar << " (no restoration without integral action)";
            a.detail = detail.str();
        }
        paper.assertions.push_back(std::move(a));
    }
    {
        PaperAssertion a;
        a.name = "sharing-ratio";
        const auto& xi = prep.controller.xi;
        const double target = xi[0] / xi[1];
        a.measured = traj.upsilon[0][at_step] / traj.upsilon[1][at_step];
        a.tolerance = 1e-6;
        a.passed = std::abs(a.measured - target) < a.tolerance;
        std::ostringstream detail;
        detail << "Y_1/Y_2 = " << a.measured << " vs xi_1/xi_2 = " << target << " while loaded";
        a.detail = detail.str();
        paper.assertions.push_back(std::move(a));
    }
    {
        PaperAssertion a;
        a.name = "injection-return";
        a.tolerance = 1e-5;
        for (std::size_t i = 0; i < traj.inverter_count(); ++i) {
            a.measured = std::max(a.measured,
                                  std::abs(traj.upsilon[i][last] - traj.upsilon[i][0]));
        }
        a.passed = a.measured < a.tolerance;
        std::ostringstream detail;
        detail << "max |Y_i(t_end) - Y_i(0)| = " << a.measured;
        a.detail = detail.str();
        paper.assertions.push_back(std::move(a));
    }

    paper.all_passed = true;
    for (const PaperAssertion& a : paper.assertions) {
        paper.all_passed = paper.all_passed && a.passed;
    }
    return paper;
}

[[nodiscard]] inline std::string render_paper_report(const PaperReport& paper) {
    std::ostringstream out;
    out << render_report(paper.run);
    out << "\n[reference experiment]\n";
    out << "  " << paper.note << "\n";
    for (const PaperAssertion& a : paper.assertions) {
        out << "  " << (a.passed ? "pass" : "FAIL") << "  " << a.name << ": " << a.detail
            << " (tolerance " << a.tolerance << ")\n";
    }
    out << "  => " << (paper.all_passed ? "all assertions passed" : "ASSERTIONS FAILED") << "\n";
    return out.str();
}

}  // namespace swingsim
