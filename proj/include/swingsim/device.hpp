#pragma once

#include <cmath>
#include <string>

#include "swingsim/errors.hpp"

namespace swingsim {

/// Direct/quadrature frame quantities at an inverter terminal. With the frame
/// synchronized to the voltage, v_q is held at zero.
struct DqFrame {
    double v_d = 1.0;
    double v_q = 0.0;
    double i_d = 0.0;
    double i_q = 0.0;
};

/// P = v_d*i_d + v_q*i_q; collapses to v_d*i_d in the synchronized frame.
[[nodiscard]] inline double instantaneous_power(const DqFrame& frame) {
    return frame.v_d * frame.i_d + frame.v_q * frame.i_q;
}

inline constexpr double kVoltageFloor = 0.1;

/// Direct-axis current reference that delivers P* + Y at the measured
/// direct-axis voltage. Refuses voltages at or below the floor, where the
/// constant-voltage assumption behind the division no longer holds.
[[nodiscard]] inline double reference_current(double nominal_power,
                                              double upsilon,
                                              double v_d,
                                              double v_min = kVoltageFloor) {
    if (v_d <= v_min) {
        throw Error(ErrorCode::VoltageCollapse,
                    "v_d = " + std::to_string(v_d) + " at or below floor " + std::to_string(v_min));
    }
    return (nominal_power + upsilon) / v_d;
}

/// First-order tracking abstractions of the PLL and the current-control
/// loop, with their internal states. Zero time constants mean instantaneous
/// tracking.
struct DeviceLags {
    double tau_pll = 0.0;    // seconds; PLL frequency-tracking constant
    double tau_cc = 0.0;     // seconds; current-controller tracking constant
    double omega_hat = 0.0;  // estimated frequency deviation
    double i_d_actual = 0.0; // delivered direct-axis current
};

struct DeviceStepResult {
    DeviceLags lags;
    double delivered_power = 0.0;  // v_d * i_d at the end of the step
};

/// Advances both lag states by one step of length h using the exact
/// exponential solution with the targets held constant over the step, so two
/// half steps compose to one full step. tau = 0 snaps to the target.
[[nodiscard]] inline DeviceStepResult device_step(DeviceLags lags,
                                                  double true_omega,
                                                  double i_star_d,
                                                  double h,
                                                  double v_d = 1.0) {
    if (!(h > 0.0)) {
        throw Error(ErrorCode::NonpositiveParameter, "device step requires h > 0");
    }
    if (lags.tau_pll > 0.0) {
        const double decay = std::exp(-h / lags.tau_pll);
        lags.omega_hat = true_omega + (lags.omega_hat - true_omega) * decay;
    } else {
        lags.omega_hat = true_omega;
    }
    if (lags.tau_cc > 0.0) {
        const double decay = std::exp(-h / lags.tau_cc);
        lags.i_d_actual = i_star_d + (lags.i_d_actual - i_star_d) * decay;
    } else {
        lags.i_d_actual = i_star_d;
    }
    return DeviceStepResult{lags, v_d * lags.i_d_actual};
}

/// Scenario-level device parameters (the "device" config section).
struct DeviceConfig {
    double tau_pll = 0.0;
    double tau_cc = 0.0;
    double v_d = 1.0;
};

}  // namespace swingsim
