#pragma once

#include <vector>

#include "swingsim/swingsim.hpp"

namespace fixtures {

/// One generator (M=0.1, D=0.05, P*=1), two inverters (P*=1.5 each), one
/// load (P*=4), chained. Balanced by construction.
[[nodiscard]] inline swingsim::NetworkSpec standard_network() {
    swingsim::NetworkSpec net;
    net.nodes = {
        swingsim::GeneratorSpec{"sg", 0.1, 0.05, 1.0},
        swingsim::InverterSpec{"inv1", 1.5},
        swingsim::InverterSpec{"inv2", 1.5},
        swingsim::LoadSpec{"load1", 4.0},
    };
    net.edges = {
        swingsim::EdgeSpec{"sg", "inv1", 0.12},
        swingsim::EdgeSpec{"inv1", "inv2", 0.12},
        swingsim::EdgeSpec{"inv2", "load1", 0.12},
    };
    return net;
}

[[nodiscard]] inline swingsim::ControllerConfig pi_controller() {
    swingsim::ControllerConfig cfg;
    cfg.mode = swingsim::ControllerMode::ConstantInputPi;
    cfg.u_bar = 0.0;
    cfg.beta = 1.5;
    cfg.gamma = 0.15;
    cfg.xi = {1.0 / 3.0, 2.0 / 3.0};
    return cfg;
}

/// Constant-input-PI scenario with a +0.5 pu load step at t = 0.
[[nodiscard]] inline swingsim::Scenario load_step_scenario(double t_end = 30.0,
                                                           double step = 1e-3) {
    swingsim::Scenario scn;
    scn.name = "load-step";
    scn.network = standard_network();
    scn.controller = pi_controller();
    scn.events = {swingsim::Event{0.0, swingsim::EventKind::LoadStep, "load1", 0.5, 0.0, 0.0}};
    scn.integrator.t_end = t_end;
    scn.integrator.step = step;
    scn.integrator.record_stride = 1;
    return scn;
}

}  // namespace fixtures
