#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "swingsim/controller.hpp"
#include "swingsim/device.hpp"
#include "swingsim/errors.hpp"
#include "swingsim/network.hpp"

namespace swingsim {

enum class EventKind {
    LoadStep,      // set a load node's deviation to a new value
    DispatchRamp,  // ramp the generator dispatch u_bar toward a target
};

struct Event {
    double time = 0.0;
    EventKind kind = EventKind::LoadStep;
    // LoadStep
    std::string node_id;
    double delta = 0.0;
    // DispatchRamp
    double target_u_bar = 0.0;
    double rate = 0.0;  // per-unit per second, > 0
};

struct IntegratorSettings {
    double t_end = 0.0;
    double step = 1e-3;
    std::size_t record_stride = 1;
    MicrogridState initial_state{};
};

struct Scenario {
    std::string name;
    NetworkSpec network;
    ControllerConfig controller;
    std::vector<Event> events;
    IntegratorSettings integrator;
    std::optional<CostMatrix> costs;
    std::optional<DeviceConfig> device;
};

/// One stretch of the run between input discontinuities. The sample at
/// t_begin is shared with the previous segment and carries the pre-event
/// inputs; the state itself is continuous across the boundary.
struct TrajectorySegment {
    double t_begin = 0.0;
    double t_end = 0.0;
    std::size_t first_sample = 0;
    std::size_t last_sample = 0;  // inclusive
    double sum_delta = 0.0;
    double u_bar_begin = 0.0;
    double u_bar_end = 0.0;
    bool ramp_active = false;
};

struct Trajectory {
    std::vector<double> time;
    std::vector<double> omega;
    std::vector<double> chi;
    std::vector<double> u;
    std::vector<double> v;
    std::vector<double> v1;
    std::vector<double> v2;
    std::vector<std::vector<double>> upsilon;     // [inverter][sample]
    std::vector<double> p_e;
    std::vector<std::vector<double>> p_inverter;  // [inverter][sample]
    std::vector<std::vector<double>> p_load;      // [load][sample]
    std::vector<double> lyapunov;
    std::vector<double> wdot_residual;
    std::vector<TrajectorySegment> segments;

    [[nodiscard]] std::size_t sample_count() const noexcept { return time.size(); }
    [[nodiscard]] std::size_t inverter_count() const noexcept { return upsilon.size(); }
    [[nodiscard]] std::size_t load_count() const noexcept { return p_load.size(); }
};

inline constexpr double kDivergenceGuard = 1e6;

namespace detail {

/// Piecewise-linear generator dispatch: constant until a ramp event arms it,
/// then moves toward the target at the given rate and stays there.
struct DispatchSchedule {
    double base = 0.0;
    bool ramping = false;
    double t0 = 0.0;
    double u0 = 0.0;
    double target = 0.0;
    double rate = 0.0;

    [[nodiscard]] double value_at(double t) const {
        if (!ramping) {
            return base;
        }
        const double direction = target >= u0 ? 1.0 : -1.0;
        const double moved = u0 + direction * rate * (t - t0);
        if (direction > 0.0 ? moved >= target : moved <= target) {
            return target;
        }
        return moved;
    }

    [[nodiscard]] double end_time() const {
        return ramping ? t0 + std::abs(target - u0) / rate
                       : -std::numeric_limits<double>::infinity();
    }

    [[nodiscard]] bool active_at(double t) const { return ramping && t < end_time(); }

    void settle_if_done(double t) {
        if (ramping && t >= end_time()) {
            base = target;
            ramping = false;
        }
    }

    void start(double t, double new_target, double new_rate) {
        u0 = value_at(t);
        base = u0;
        t0 = t;
        target = new_target;
        rate = new_rate;
        ramping = true;
        settle_if_done(t);  // zero-distance ramp completes immediately
    }
};

struct StateDerivative {
    double domega = 0.0;
    double dchi = 0.0;
};

/// Closed-loop right-hand side with the proportional inverter action folded
/// into the damping. `u_direct` is the dispatch u_bar(t) for the constant-
/// input modes and ignored in DualPi, where u = -alpha*chi.
[[nodiscard]] inline StateDerivative closed_loop_rhs(const ControllerConfig& cfg,
                                                     const GeneratorSpec& gen,
                                                     const MicrogridState& x,
                                                     double u_direct,
                                                     double sum_delta) {
    StateDerivative d;
    const double drag = (gen.damping + cfg.gamma) * x.omega;
    switch (cfg.mode) {
        case ControllerMode::ConstantInputPi:
            d.domega = (u_direct - cfg.beta * x.chi - drag - sum_delta) / gen.inertia;
            d.dchi = x.omega;
            break;
        case ControllerMode::Proportional:
            d.domega = (u_direct - drag - sum_delta) / gen.inertia;
            d.dchi = 0.0;
            break;
        case ControllerMode::DualPi:
            d.domega = (-(cfg.alpha + cfg.beta) * x.chi - drag - sum_delta) / gen.inertia;
            d.dchi = x.omega;
            break;
    }
    return d;
}

template <typename Rhs>
[[nodiscard]] inline MicrogridState rk4_step(const Rhs& rhs,
                                             double t,
                                             const MicrogridState& x,
                                             double h) {
    const StateDerivative k1 = rhs(t, x);
    const StateDerivative k2 =
        rhs(t + 0.5 * h, MicrogridState{x.omega + 0.5 * h * k1.domega, x.chi + 0.5 * h * k1.dchi});
    const StateDerivative k3 =
        rhs(t + 0.5 * h, MicrogridState{x.omega + 0.5 * h * k2.domega, x.chi + 0.5 * h * k2.dchi});
    const StateDerivative k4 =
        rhs(t + h, MicrogridState{x.omega + h * k3.domega, x.chi + h * k3.dchi});
    return MicrogridState{
        x.omega + h / 6.0 * (k1.domega + 2.0 * k2.domega + 2.0 * k3.domega + k4.domega),
        x.chi + h / 6.0 * (k1.dchi + 2.0 * k2.dchi + 2.0 * k3.dchi + k4.dchi)};
}

inline void guard_state(const MicrogridState& x, double t) {
    if (!std::isfinite(x.omega) || !std::isfinite(x.chi) ||
        std::abs(x.omega) > kDivergenceGuard || std::abs(x.chi) > kDivergenceGuard) {
        throw Error(ErrorCode::NonFiniteState,
                    "state diverged at t = " + std::to_string(t));
    }
}

/// Number of fixed steps covering [t0, t1]; the final step is shortened to
/// land exactly on t1.
[[nodiscard]] inline std::size_t segment_step_count(double t0, double t1, double h) {
    const double span = t1 - t0;
    if (span <= 0.0) {
        return 0;
    }
    auto n = static_cast<std::size_t>(std::ceil(span / h - 1e-9));
    return n == 0 ? 1 : n;
}

}  // namespace detail

struct PreparedScenario {
    Network network;
    ControllerConfig controller;
};

/// Full validation pass over a scenario: network, controller (with the
/// beta = 0 rerouting), integrator settings, and event list.
[[nodiscard]] inline PreparedScenario prepare_scenario(const Scenario& scn) {
    PreparedScenario prep{validate_network(scn.network), ControllerConfig{}};
    prep.controller = validate_controller(scn.controller, prep.network.inverter_count());

    const auto& settings = scn.integrator;
    if (!(settings.t_end > 0.0)) {
        throw Error(ErrorCode::InvalidScenario, "t_end must be > 0");
    }
    if (!(settings.step > 0.0)) {
        throw Error(ErrorCode::InvalidScenario, "integrator step must be > 0");
    }
    if (settings.record_stride == 0) {
        throw Error(ErrorCode::InvalidScenario, "record_stride must be >= 1");
    }
    if (!std::isfinite(settings.initial_state.omega) || !std::isfinite(settings.initial_state.chi)) {
        throw Error(ErrorCode::InvalidScenario, "initial state must be finite");
    }

    double previous = -std::numeric_limits<double>::infinity();
    for (const Event& ev : scn.events) {
        if (!(ev.time >= 0.0) || ev.time > settings.t_end) {
            throw Error(ErrorCode::InvalidScenario,
                        "event at t = " + std::to_string(ev.time) + " outside [0, t_end]");
        }
        if (!(ev.time > previous)) {
            throw Error(ErrorCode::InvalidScenario, "events must be strictly time-ordered");
        }
        previous = ev.time;
        if (ev.kind == EventKind::LoadStep) {
            (void)prep.network.load_index(ev.node_id);  // throws UnknownNode
            if (!std::isfinite(ev.delta)) {
                throw Error(ErrorCode::InvalidScenario, "load step value must be finite");
            }
        } else {
            if (!(ev.rate > 0.0)) {
                throw Error(ErrorCode::InvalidScenario, "dispatch ramp rate must be > 0");
            }
            if (!std::isfinite(ev.target_u_bar)) {
                throw Error(ErrorCode::InvalidScenario, "dispatch ramp target must be finite");
            }
            if (prep.controller.mode == ControllerMode::DualPi) {
                throw Error(ErrorCode::InvalidScenario,
                            "dispatch ramps need a constant-dispatch mode, not dual-pi");
            }
        }
    }
    return prep;
}

/// Integrates the closed loop over the scenario with classical fixed-step
/// RK4. Integration is segmented so every event time and every ramp
/// completion is hit exactly; events apply at the boundary after the
/// boundary sample is recorded, so each event time appears in the trajectory
/// with its pre-event inputs. Samples are kept every record_stride steps
/// plus at every boundary.
[[nodiscard]] inline Trajectory integrate(const Scenario& scn, const PreparedScenario& prep) {
    const Network& net = prep.network;
    const ControllerConfig& cfg = prep.controller;
    const GeneratorSpec& gen = net.generator();
    const IntegratorSettings& settings = scn.integrator;
    const double h = settings.step;

    Trajectory traj;
    traj.upsilon.resize(net.inverter_count());
    traj.p_inverter.resize(net.inverter_count());
    traj.p_load.resize(net.load_count());

    LoadDeviation delta{std::vector<double>(net.load_count(), 0.0)};
    detail::DispatchSchedule dispatch;
    dispatch.base = cfg.u_bar;

    MicrogridState state = settings.initial_state;
    ControllerConfig cfg_now = cfg;  // u_bar tracks the dispatch schedule

    const auto record = [&](double t) {
        if (!traj.time.empty() && traj.time.back() == t) {
            return;  // boundary already sampled
        }
        const double u_bar_t = dispatch.value_at(t);
        cfg_now.u_bar = u_bar_t;
        const ControlSignals sig = control_signals(cfg_now, state);
        const PowerFlows flows = power_flows(net, delta, sig.v, cfg.xi);
        const double sum_delta = delta.sum();
        const Equilibrium eq = closed_loop_equilibrium(cfg_now, sum_delta, gen.damping);

        traj.time.push_back(t);
        traj.omega.push_back(state.omega);
        traj.chi.push_back(state.chi);
        traj.u.push_back(sig.u);
        traj.v.push_back(sig.v);
        traj.v1.push_back(sig.v1);
        traj.v2.push_back(sig.v2);
        for (std::size_t i = 0; i < net.inverter_count(); ++i) {
            traj.upsilon[i].push_back(sig.upsilon[i]);
            traj.p_inverter[i].push_back(flows.inverter_injection[i]);
        }
        traj.p_e.push_back(flows.generator_output);
        for (std::size_t i = 0; i < net.load_count(); ++i) {
            traj.p_load[i].push_back(flows.load_consumption[i]);
        }
        traj.lyapunov.push_back(lyapunov_value(cfg_now, state, eq, gen.inertia));
        traj.wdot_residual.push_back(0.0);  // filled per segment below
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
    std::size_t global_step = 0;
    while (t < settings.t_end) {
        // Next boundary: event, ramp completion, or the end of the run.
        double t_boundary = settings.t_end;
        if (next_event < scn.events.size()) {
            t_boundary = std::min(t_boundary, scn.events[next_event].time);
        }
        if (dispatch.active_at(t)) {
            const double ramp_end = dispatch.end_time();
            if (ramp_end > t && ramp_end < t_boundary) {
                t_boundary = ramp_end;
            }
        }

        TrajectorySegment segment;
        segment.t_begin = t;
        segment.t_end = t_boundary;
        segment.first_sample = traj.time.size() - 1;
        segment.sum_delta = delta.sum();
        segment.u_bar_begin = dispatch.value_at(t);
        segment.u_bar_end = dispatch.value_at(t_boundary);
        segment.ramp_active = dispatch.active_at(t);

        const auto rhs = [&](double s, const MicrogridState& x) {
            return detail::closed_loop_rhs(cfg, gen, x, dispatch.value_at(s), segment.sum_delta);
        };

        // t_boundary > t always holds here: same-time events were applied
        // before this segment began.
        const std::size_t steps = detail::segment_step_count(t, t_boundary, h);
        for (std::size_t k = 1; k <= steps; ++k) {
            const double t_step_end = (k == steps) ? t_boundary : segment.t_begin + static_cast<double>(k) * h;
            state = detail::rk4_step(rhs, t, state, t_step_end - t);
            t = t_step_end;
            detail::guard_state(state, t);
            ++global_step;
            if (global_step % settings.record_stride == 0 || k == steps) {
                record(t);
            }
        }

        segment.last_sample = traj.time.size() - 1;
        traj.segments.push_back(segment);

        dispatch.settle_if_done(t);
        while (next_event < scn.events.size() && scn.events[next_event].time == t) {
            apply_event(scn.events[next_event]);
            ++next_event;
        }
    }

    // Wdot residual: nonuniform central difference of W against the analytic
    // dissipation, per constant-input segment; edges and ramp segments stay 0.
    for (const TrajectorySegment& segment : traj.segments) {
        if (segment.ramp_active || segment.last_sample < segment.first_sample + 2) {
            continue;
        }
        cfg_now.u_bar = segment.u_bar_begin;
        const Equilibrium eq = closed_loop_equilibrium(cfg_now, segment.sum_delta, gen.damping);
        const auto w_at = [&](std::size_t k) {
            return lyapunov_value(cfg_now, MicrogridState{traj.omega[k], traj.chi[k]}, eq,
                                  gen.inertia);
        };
        for (std::size_t k = segment.first_sample + 1; k < segment.last_sample; ++k) {
            const double a = traj.time[k + 1] - traj.time[k];
            const double b = traj.time[k] - traj.time[k - 1];
            const double dw = (b * b * w_at(k + 1) - a * a * w_at(k - 1) +
                               (a * a - b * b) * w_at(k)) /
                              (a * b * (a + b));
            const double analytic = lyapunov_dissipation(
                cfg_now, MicrogridState{traj.omega[k], traj.chi[k]}, eq, gen.damping);
            traj.wdot_residual[k] = dw - analytic;
        }
    }
    return traj;
}

[[nodiscard]] inline Trajectory integrate(const Scenario& scn) {
    return integrate(scn, prepare_scenario(scn));
}

/// Largest per-sample violation of P_e + sum(P_I) - sum(P_L) = 0.
[[nodiscard]] inline double max_conservation_residual(const Trajectory& traj) {
    double worst = 0.0;
    for (std::size_t k = 0; k < traj.sample_count(); ++k) {
        double sum = traj.p_e[k];
        for (const auto& series : traj.p_inverter) {
            sum += series[k];
        }
        for (const auto& series : traj.p_load) {
            sum -= series[k];
        }
        worst = std::max(worst, std::abs(sum));
    }
    return worst;
}

inline constexpr double kLyapunovIncrementTolerance = 1e-9;

struct SegmentMonotonicity {
    std::size_t segment_index = 0;
    bool checked = false;  // ramp segments and two-sample stubs are skipped
    double max_positive_increment = 0.0;
    std::size_t violations = 0;
    double max_wdot_residual = 0.0;
};

struct MonotonicityReport {
    std::vector<SegmentMonotonicity> segments;
    std::size_t total_violations = 0;
    double max_positive_increment = 0.0;
    double max_wdot_residual = 0.0;
};

/// Monotonicity of the Lyapunov value within one inter-event segment,
/// relative to that segment's equilibrium. An increment counts as a
/// violation above 1e-9 * max(1, W).
[[nodiscard]] inline SegmentMonotonicity check_lyapunov_segment(const Trajectory& traj,
                                                                std::size_t segment_index,
                                                                const ControllerConfig& cfg,
                                                                double inertia,
                                                                double damping) {
    const TrajectorySegment& segment = traj.segments.at(segment_index);
    SegmentMonotonicity result;
    result.segment_index = segment_index;
    if (segment.ramp_active || segment.last_sample <= segment.first_sample) {
        return result;
    }
    result.checked = true;

    ControllerConfig cfg_seg = cfg;
    cfg_seg.u_bar = segment.u_bar_begin;
    const Equilibrium eq = closed_loop_equilibrium(cfg_seg, segment.sum_delta, damping);

    double previous_w = 0.0;
    for (std::size_t k = segment.first_sample; k <= segment.last_sample; ++k) {
        const MicrogridState x{traj.omega[k], traj.chi[k]};
        const double w = lyapunov_value(cfg_seg, x, eq, inertia);
        if (k > segment.first_sample) {
            const double increment = w - previous_w;
            result.max_positive_increment = std::max(result.max_positive_increment, increment);
            if (increment > kLyapunovIncrementTolerance * std::max(1.0, previous_w)) {
                ++result.violations;
            }
        }
        previous_w = w;
        result.max_wdot_residual = std::max(result.max_wdot_residual,
                                            std::abs(traj.wdot_residual[k]));
    }
    return result;
}

/// Runs the per-segment monotonicity check across the whole trajectory.
[[nodiscard]] inline MonotonicityReport check_lyapunov(const Trajectory& traj,
                                                       const ControllerConfig& cfg,
                                                       double inertia,
                                                       double damping) {
    MonotonicityReport report;
    for (std::size_t s = 0; s < traj.segments.size(); ++s) {
        SegmentMonotonicity seg = check_lyapunov_segment(traj, s, cfg, inertia, damping);
        report.total_violations += seg.violations;
        report.max_positive_increment = std::max(report.max_positive_increment,
                                                 seg.max_positive_increment);
        report.max_wdot_residual = std::max(report.max_wdot_residual, seg.max_wdot_residual);
        report.segments.push_back(std::move(seg));
    }
    return report;
}

struct SteadyState {
    double window_begin = 0.0;
    std::size_t sample_count = 0;
    double omega_mean = 0.0;
    double omega_max_dev = 0.0;
    double u_mean = 0.0;
    double u_max_dev = 0.0;
    double v_mean = 0.0;
    double v_max_dev = 0.0;
    std::vector<double> upsilon_mean;
    double upsilon_max_dev = 0.0;
};

/// Trailing-window averages of the regulated quantities plus the largest
/// in-window deviation from the mean, as a settling indicator. The window
/// must fit inside the final input-constant stretch of the run.
[[nodiscard]] inline SteadyState steady_state_extract(const Trajectory& traj, double window) {
    if (traj.sample_count() == 0 || traj.segments.empty()) {
        throw Error(ErrorCode::InvalidScenario, "empty trajectory");
    }
    if (!(window > 0.0)) {
        throw Error(ErrorCode::WindowTooLong, "window must be > 0");
    }
    const double t_end = traj.time.back();
    if (traj.segments.back().ramp_active) {
        throw Error(ErrorCode::WindowTooLong, "dispatch ramp still active at t_end");
    }
    const double last_quiet = traj.segments.back().t_begin;
    if (t_end - last_quiet < window) {
        throw Error(ErrorCode::WindowTooLong,
                    "window " + std::to_string(window) + "s does not fit after the last event at t = " +
                        std::to_string(last_quiet));
    }

    SteadyState out;
    out.window_begin = t_end - window;
    out.upsilon_mean.assign(traj.inverter_count(), 0.0);

    std::size_t first = traj.sample_count();
    for (std::size_t k = 0; k < traj.sample_count(); ++k) {
        if (traj.time[k] >= out.window_begin) {
            first = k;
            break;
        }
    }
    for (std::size_t k = first; k < traj.sample_count(); ++k) {
        out.omega_mean += traj.omega[k];
        out.u_mean += traj.u[k];
        out.v_mean += traj.v[k];
        for (std::size_t i = 0; i < traj.inverter_count(); ++i) {
            out.upsilon_mean[i] += traj.upsilon[i][k];
        }
        ++out.sample_count;
    }
    const auto n = static_cast<double>(out.sample_count);
    out.omega_mean /= n;
    out.u_mean /= n;
    out.v_mean /= n;
    for (double& value : out.upsilon_mean) {
        value /= n;
    }
    for (std::size_t k = first; k < traj.sample_count(); ++k) {
        out.omega_max_dev = std::max(out.omega_max_dev, std::abs(traj.omega[k] - out.omega_mean));
        out.u_max_dev = std::max(out.u_max_dev, std::abs(traj.u[k] - out.u_mean));
        out.v_max_dev = std::max(out.v_max_dev, std::abs(traj.v[k] - out.v_mean));
        for (std::size_t i = 0; i < traj.inverter_count(); ++i) {
            out.upsilon_max_dev = std::max(out.upsilon_max_dev,
                                           std::abs(traj.upsilon[i][k] - out.upsilon_mean[i]));
        }
    }
    return out;
}

}  // namespace swingsim
