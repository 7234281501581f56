#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "swingsim/device.hpp"
#include "swingsim/errors.hpp"
#include "swingsim/simulator.hpp"

namespace swingsim {

namespace detail {

/// Power trajectories sampled at every integrator step, the common footing
/// for comparing the ideal and lag-afflicted inverter models.
struct PowerRun {
    std::vector<double> time;
    std::vector<std::vector<double>> p_inverter;  // [inverter][sample]
    std::vector<double> p_e;
    double last_boundary = 0.0;
};

[[nodiscard]] inline PowerRun ideal_power_run(const Scenario& scn, const PreparedScenario& prep) {
    Scenario dense = scn;
    dense.integrator.record_stride = 1;
    Trajectory traj = integrate(dense, prep);
    PowerRun run{std::move(traj.time), std::move(traj.p_inverter), std::move(traj.p_e), 0.0};
    for (const TrajectorySegment& segment : traj.segments) {
        run.last_boundary = std::max(run.last_boundary, segment.t_begin);
    }
    return run;
}

/// Runs the scenario with the inverters behind first-order PLL and
/// current-tracking lags. The swing equation is integrated with RK4 while the
/// delivered inverter power is held over each step; the lag states advance by
/// their exact exponential updates. With both time constants zero this
/// boils down to the ideal closed loop, so the same code path is used.
[[nodiscard]] inline PowerRun lagged_power_run(const Scenario& scn,
                                               const PreparedScenario& prep,
                                               const DeviceConfig& device) {
    if (device.tau_pll == 0.0 && device.tau_cc == 0.0) {
        return ideal_power_run(scn, prep);
    }

    const Network& net = prep.network;
    const ControllerConfig& cfg = prep.controller;
    const GeneratorSpec& gen = net.generator();
    const double h = scn.integrator.step;
    const double t_end = scn.integrator.t_end;
    const std::size_t n_inv = net.inverter_count();

    PowerRun run;
    run.p_inverter.resize(n_inv);

    LoadDeviation delta{std::vector<double>(net.load_count(), 0.0)};
    DispatchSchedule dispatch;
    dispatch.base = cfg.u_bar;

    MicrogridState swing = scn.integrator.initial_state;  // chi drives u in DualPi only

    // Local controller at each inverter: own PLL estimate, own integrator,
    // own current loop. They stay numerically identical across inverters but
    // are stored per device to mirror the hardware structure.
    struct InverterDevice {
        DeviceLags lags;
        double chi_hat = 0.0;
    };
    const auto local_v = [&](const InverterDevice& dev) {
        double v = -cfg.gamma * dev.lags.omega_hat;
        if (cfg.mode != ControllerMode::Proportional) {
            v -= cfg.beta * dev.chi_hat;
        }
        return v;
    };

    std::vector<InverterDevice> devices(n_inv);
    for (std::size_t i = 0; i < n_inv; ++i) {
        devices[i].lags.tau_pll = device.tau_pll;
        devices[i].lags.tau_cc = device.tau_cc;
        devices[i].lags.omega_hat = swing.omega;
        devices[i].chi_hat = swing.chi;
        devices[i].lags.i_d_actual = reference_current(
            net.inverter_nominal()[i], cfg.xi[i] * local_v(devices[i]), device.v_d);
    }

    const auto record = [&](double t) {
        if (!run.time.empty() && run.time.back() == t) {
            return;
        }
        run.time.push_back(t);
        double sum_inv = 0.0;
        for (std::size_t i = 0; i < n_inv; ++i) {
            const double p = device.v_d * devices[i].lags.i_d_actual;
            run.p_inverter[i].push_back(p);
            sum_inv += p;
        }
        double sum_load = 0.0;
        for (std::size_t i = 0; i < net.load_count(); ++i) {
            sum_load += net.load_nominal()[i] + delta.delta[i];
        }
        run.p_e.push_back(sum_load - sum_inv);
    };

    const auto apply_event = [&](const Event& ev) {
        if (ev.kind == EventKind::LoadStep) {
            delta.delta[net.load_index(ev.node_id)] = ev.delta;
        } else {
            dispatch.start(ev.time, ev.target_u_bar, ev.rate);
        }
    };

    record(0.0);
    std::size_t next_event = 0;
    while (next_event < scn.events.size() && scn.events[next_event].time == 0.0) {
        apply_event(scn.events[next_event]);
        ++next_event;
    }

    double t = 0.0;
    while (t < t_end) {
        double t_boundary = t_end;
        if (next_event < scn.events.size()) {
            t_boundary = std::min(t_boundary, scn.events[next_event].time);
        }
        if (dispatch.active_at(t)) {
            const double ramp_end = dispatch.end_time();
            if (ramp_end > t && ramp_end < t_boundary) {
                t_boundary = ramp_end;
            }
        }
        run.last_boundary = std::max(run.last_boundary, t);

        const double sum_delta = delta.sum();
        const double seg_begin = t;
        const std::size_t steps = segment_step_count(t, t_boundary, h);
        for (std::size_t k = 1; k <= steps; ++k) {
            const double t_step_end =
                (k == steps) ? t_boundary : seg_begin + static_cast<double>(k) * h;
            const double h_step = t_step_end - t;

            // Delivered inverter power over this step, from the current loop
            // states at the step start.
            double sum_upsilon = 0.0;
            std::vector<double> i_star(n_inv);
            for (std::size_t i = 0; i < n_inv; ++i) {
                sum_upsilon += device.v_d * devices[i].lags.i_d_actual - net.inverter_nominal()[i];
                i_star[i] = reference_current(net.inverter_nominal()[i],
                                              cfg.xi[i] * local_v(devices[i]), device.v_d);
            }

            const double omega_start = swing.omega;
            const auto rhs = [&](double s, const MicrogridState& x) {
                StateDerivative d;
                const double u = (cfg.mode == ControllerMode::DualPi) ? -cfg.alpha * x.chi
                                                                      : dispatch.value_at(s);
                d.domega = (u + sum_upsilon - sum_delta - gen.damping * x.omega) / gen.inertia;
                d.dchi = (cfg.mode == ControllerMode::DualPi) ? x.omega : 0.0;
                return d;
            };
            swing = rk4_step(rhs, t, swing, h_step);
            t = t_step_end;
            guard_state(swing, t);

            for (std::size_t i = 0; i < n_inv; ++i) {
                InverterDevice& dev = devices[i];
                // chi_hat integrates the PLL estimate exactly over the step,
                // with the true frequency held at its step-start value.
                if (dev.lags.tau_pll > 0.0) {
                    const double tau = dev.lags.tau_pll;
                    dev.chi_hat += omega_start * h_step +
                                   (dev.lags.omega_hat - omega_start) * tau *
                                       (1.0 - std::exp(-h_step / tau));
                } else {
                    dev.chi_hat += omega_start * h_step;
                }
                dev.lags = device_step(dev.lags, omega_start, i_star[i], h_step, device.v_d).lags;
            }
            record(t);
        }

        dispatch.settle_if_done(t);
        while (next_event < scn.events.size() && scn.events[next_event].time == t) {
            apply_event(scn.events[next_event]);
            ++next_event;
        }
    }
    return run;
}

}  // namespace detail

struct FidelityGapReport {
    double max_gap = 0.0;             // worst per-sample injection discrepancy
    double post_transient_gap = 0.0;  // same, restricted to the settled tail
    double post_transient_begin = 0.0;
    std::size_t sample_count = 0;
};

/// Runs the scenario twice, with ideal and with lag-afflicted inverters, and
/// reports the largest discrepancy between the two power trajectories. The
/// post-transient figure starts settle_margin seconds after the last input
/// discontinuity.
[[nodiscard]] inline FidelityGapReport fidelity_gap(const Scenario& scn,
                                                    const DeviceConfig& device,
                                                    double settle_margin = 3.0) {
    const PreparedScenario prep = prepare_scenario(scn);
    const detail::PowerRun ideal = detail::ideal_power_run(scn, prep);
    const detail::PowerRun lagged = detail::lagged_power_run(scn, prep, device);
    if (ideal.time.size() != lagged.time.size()) {
        throw Error(ErrorCode::InvalidScenario, "fidelity runs fell out of lockstep");
    }

    FidelityGapReport report;
    report.post_transient_begin = ideal.last_boundary + settle_margin;
    report.sample_count = ideal.time.size();
    if (ideal.time.back() < report.post_transient_begin) {
        throw Error(ErrorCode::WindowTooLong,
                    "no settled samples after t = " + std::to_string(report.post_transient_begin));
    }

    for (std::size_t k = 0; k < ideal.time.size(); ++k) {
        double gap = std::abs(ideal.p_e[k] - lagged.p_e[k]);
        for (std::size_t i = 0; i < ideal.p_inverter.size(); ++i) {
            gap = std::max(gap, std::abs(ideal.p_inverter[i][k] - lagged.p_inverter[i][k]));
        }
        report.max_gap = std::max(report.max_gap, gap);
        if (ideal.time[k] >= report.post_transient_begin) {
            report.post_transient_gap = std::max(report.post_transient_gap, gap);
        }
    }
    return report;
}

}  // namespace swingsim
