#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "swingsim/errors.hpp"
#include "swingsim/network.hpp"

namespace swingsim {

/// The three controller laws. ConstantInputPi keeps the generator at a fixed
/// dispatch u_bar and gives the inverters a PI law v = -gamma*omega - beta*chi.
/// Proportional is the beta = 0 special case (pure droop support, no integral
/// action). DualPi adds an integral controller u = -alpha*chi on the
/// generator as well.
enum class ControllerMode {
    ConstantInputPi,
    Proportional,
    DualPi,
};

[[nodiscard]] constexpr const char* controller_mode_name(ControllerMode mode) noexcept {
    switch (mode) {
        case ControllerMode::ConstantInputPi: return "constant-input-pi";
        case ControllerMode::Proportional: return "proportional";
        case ControllerMode::DualPi: return "dual-pi";
    }
    return "?";
}

struct ControllerConfig {
    ControllerMode mode = ControllerMode::ConstantInputPi;
    double u_bar = 0.0;   // constant generator dispatch (unused in DualPi)
    double alpha = 0.0;   // generator integral gain (DualPi only)
    double beta = 0.0;    // inverter integral gain
    double gamma = 0.0;   // inverter proportional gain, > 0 always
    std::vector<double> xi;  // sharing vector, 1^T xi = 1
    bool allow_nonpositive_xi = false;
};

/// Validates gains against the mode and the sharing vector against the
/// normalization constraint. A ConstantInputPi request with beta = 0 is
/// routed to Proportional, which is the same closed loop without the
/// integrator state.
[[nodiscard]] inline ControllerConfig validate_controller(ControllerConfig cfg,
                                                          std::size_t inverter_count) {
    if (cfg.mode == ControllerMode::ConstantInputPi && cfg.beta == 0.0) {
        cfg.mode = ControllerMode::Proportional;
    }

    if (!(cfg.gamma > 0.0)) {
        throw Error(ErrorCode::GainOutOfRange, "gamma must be > 0");
    }
    switch (cfg.mode) {
        case ControllerMode::ConstantInputPi:
            if (!(cfg.beta > 0.0)) {
                throw Error(ErrorCode::GainOutOfRange, "constant-input-pi requires beta > 0");
            }
            if (cfg.alpha != 0.0) {
                throw Error(ErrorCode::GainOutOfRange,
                            "constant-input-pi does not use alpha; set it to 0");
            }
            break;
        case ControllerMode::Proportional:
            if (cfg.beta != 0.0 || cfg.alpha != 0.0) {
                throw Error(ErrorCode::GainOutOfRange,
                            "proportional mode requires alpha = beta = 0");
            }
            break;
        case ControllerMode::DualPi:
            if (!(cfg.alpha > 0.0) || !(cfg.beta > 0.0)) {
                throw Error(ErrorCode::GainOutOfRange, "dual-pi requires alpha > 0 and beta > 0");
            }
            if (cfg.u_bar != 0.0) {
                throw Error(ErrorCode::GainOutOfRange,
                            "dual-pi drives u from the integrator; set u_bar to 0");
            }
            break;
    }

    if (cfg.xi.size() != inverter_count) {
        throw Error(ErrorCode::DimensionMismatch,
                    "xi has " + std::to_string(cfg.xi.size()) + " entries for " +
                        std::to_string(inverter_count) + " inverters");
    }
    const double xi_sum = std::accumulate(cfg.xi.begin(), cfg.xi.end(), 0.0);
    if (std::abs(xi_sum - 1.0) > kSharingNormalizationTolerance) {
        throw Error(ErrorCode::SharingVectorUnnormalized,
                    "xi sums to " + std::to_string(xi_sum) + ", expected 1");
    }
    if (!cfg.allow_nonpositive_xi) {
        for (double entry : cfg.xi) {
            if (!(entry > 0.0)) {
                throw Error(ErrorCode::NonpositiveSharingEntry,
                            "xi entries must be > 0 (set allow_nonpositive_xi to override)");
            }
        }
    }
    return cfg;
}

struct ControlSignals {
    double u = 0.0;    // generator control
    double v = 0.0;    // inverter common signal, v = v1 + v2
    double v1 = 0.0;   // proportional part, -gamma*omega
    double v2 = 0.0;   // integral part, -beta*chi
    std::vector<double> upsilon;  // per-inverter injections, v * xi
};

[[nodiscard]] inline ControlSignals control_signals(const ControllerConfig& cfg,
                                                    const MicrogridState& state) {
    ControlSignals out;
    out.v1 = -cfg.gamma * state.omega;
    switch (cfg.mode) {
        case ControllerMode::ConstantInputPi:
            out.u = cfg.u_bar;
            out.v2 = -cfg.beta * state.chi;
            break;
        case ControllerMode::Proportional:
            out.u = cfg.u_bar;
            out.v2 = 0.0;
            break;
        case ControllerMode::DualPi:
            out.u = -cfg.alpha * state.chi;
            out.v2 = -cfg.beta * state.chi;
            break;
    }
    out.v = out.v1 + out.v2;
    out.upsilon.resize(cfg.xi.size());
    for (std::size_t i = 0; i < cfg.xi.size(); ++i) {
        out.upsilon[i] = out.v * cfg.xi[i];
    }
    return out;
}

struct Equilibrium {
    double omega_bar = 0.0;
    double chi_bar = 0.0;     // 0 in Proportional mode, where no integrator exists
    double u_bar_eq = 0.0;    // steady generator control
    double v_bar = 0.0;       // steady inverter common signal
    std::vector<double> upsilon_bar;
};

/// Closed forms of the stable equilibrium for each mode, given the aggregate
/// load deviation and the generator damping.
[[nodiscard]] inline Equilibrium closed_loop_equilibrium(const ControllerConfig& cfg,
                                                         double sum_delta,
                                                         double damping) {
    Equilibrium eq;
    switch (cfg.mode) {
        case ControllerMode::ConstantInputPi: {
            if (cfg.beta == 0.0) {
                throw Error(ErrorCode::ZeroGainDivision,
                            "constant-input-pi equilibrium needs beta > 0");
            }
            eq.omega_bar = 0.0;
            eq.chi_bar = (cfg.u_bar - sum_delta) / cfg.beta;
            eq.u_bar_eq = cfg.u_bar;
            eq.v_bar = sum_delta - cfg.u_bar;
            break;
        }
        case ControllerMode::Proportional: {
            eq.omega_bar = (cfg.u_bar - sum_delta) / (damping + cfg.gamma);
            eq.chi_bar = 0.0;
            eq.u_bar_eq = cfg.u_bar;
            eq.v_bar = -cfg.gamma * eq.omega_bar;
            break;
        }
        case ControllerMode::DualPi: {
            const double total_gain = cfg.alpha + cfg.beta;
            if (total_gain == 0.0) {
                throw Error(ErrorCode::ZeroGainDivision, "dual-pi equilibrium needs alpha + beta > 0");
            }
            eq.omega_bar = 0.0;
            eq.chi_bar = -sum_delta / total_gain;
            eq.u_bar_eq = cfg.alpha * sum_delta / total_gain;
            eq.v_bar = cfg.beta * sum_delta / total_gain;
            break;
        }
    }
    eq.upsilon_bar.resize(cfg.xi.size());
    for (std::size_t i = 0; i < cfg.xi.size(); ++i) {
        eq.upsilon_bar[i] = eq.v_bar * cfg.xi[i];
    }
    return eq;
}

/// Energy-like distance from the equilibrium; zero exactly there,
/// positive elsewhere, and nonincreasing along closed-loop solutions.
[[nodiscard]] inline double lyapunov_value(const ControllerConfig& cfg,
                                           const MicrogridState& state,
                                           const Equilibrium& eq,
                                           double inertia) {
    switch (cfg.mode) {
        case ControllerMode::ConstantInputPi: {
            const double dchi = state.chi - eq.chi_bar;
            return 0.5 * inertia * state.omega * state.omega + 0.5 * cfg.beta * dchi * dchi;
        }
        case ControllerMode::Proportional: {
            const double domega = state.omega - eq.omega_bar;
            return 0.5 * inertia * domega * domega;
        }
        case ControllerMode::DualPi: {
            const double dchi = state.chi - eq.chi_bar;
            return 0.5 * inertia * state.omega * state.omega +
                   0.5 * (cfg.alpha + cfg.beta) * dchi * dchi;
        }
    }
    return 0.0;
}

/// Time derivative of lyapunov_value along the closed loop:
/// -(D + gamma) * (omega - omega_bar)^2. The equilibrium frequency is zero in
/// the integral-action modes, recovering the plain -(D + gamma) * omega^2.
[[nodiscard]] inline double lyapunov_dissipation(const ControllerConfig& cfg,
                                                 const MicrogridState& state,
                                                 const Equilibrium& eq,
                                                 double damping) {
    const double domega = state.omega - (cfg.mode == ControllerMode::Proportional
                                             ? eq.omega_bar
                                             : 0.0);
    return -(damping + cfg.gamma) * domega * domega;
}

}  // namespace swingsim
