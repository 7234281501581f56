#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "swingsim/controller.hpp"

using namespace swingsim;
using Catch::Approx;

TEST_CASE("controller validation", "[controller]") {
    SECTION("beta = 0 in constant-input-pi routes to proportional") {
        ControllerConfig cfg = fixtures::pi_controller();
        cfg.beta = 0.0;
        const ControllerConfig normalized = validate_controller(cfg, 2);
        CHECK(normalized.mode == ControllerMode::Proportional);
    }
    SECTION("gamma must be positive") {
        ControllerConfig cfg = fixtures::pi_controller();
        cfg.gamma = 0.0;
        CHECK_THROWS_AS((void)validate_controller(cfg, 2), Error);
    }
    SECTION("dual-pi needs both integral gains") {
        ControllerConfig cfg = fixtures::pi_controller();
        cfg.mode = ControllerMode::DualPi;
        cfg.alpha = 0.0;
        CHECK_THROWS_AS((void)validate_controller(cfg, 2), Error);
    }
    SECTION("dual-pi rejects a constant dispatch value") {
        ControllerConfig cfg = fixtures::pi_controller();
        cfg.mode = ControllerMode::DualPi;
        cfg.alpha = 1.0;
        cfg.u_bar = 0.3;
        CHECK_THROWS_AS((void)validate_controller(cfg, 2), Error);
    }
    SECTION("unnormalized xi is rejected") {
        ControllerConfig cfg = fixtures::pi_controller();
        cfg.xi = {0.5, 0.4};
        CHECK_THROWS_AS((void)validate_controller(cfg, 2), Error);
    }
    SECTION("nonpositive xi entries need the override flag") {
        ControllerConfig cfg = fixtures::pi_controller();
        cfg.xi = {1.5, -0.5};
        CHECK_THROWS_AS((void)validate_controller(cfg, 2), Error);
        cfg.allow_nonpositive_xi = true;
        CHECK_NOTHROW((void)validate_controller(cfg, 2));
    }
}

TEST_CASE("control signals", "[controller]") {
    SECTION("origin state produces no inverter action") {
        const ControllerConfig cfg = validate_controller(fixtures::pi_controller(), 2);
        const ControlSignals sig = control_signals(cfg, MicrogridState{0.0, 0.0});
        CHECK(sig.v == 0.0);
        CHECK(sig.u == cfg.u_bar);
        CHECK(sig.upsilon[0] == 0.0);
        CHECK(sig.upsilon[1] == 0.0);
    }
    SECTION("pi law splits into proportional and integral parts") {
        ControllerConfig cfg = fixtures::pi_controller();
        const ControlSignals sig = control_signals(cfg, MicrogridState{0.1, 0.2});
        CHECK(sig.v1 == Approx(-0.015));
        CHECK(sig.v2 == Approx(-0.3));
        CHECK(sig.v == Approx(-0.315));
    }
    SECTION("dual-pi drives the generator from the integrator") {
        ControllerConfig cfg = fixtures::pi_controller();
        cfg.mode = ControllerMode::DualPi;
        cfg.alpha = 1.0;
        const ControlSignals sig = control_signals(cfg, MicrogridState{0.0, 0.2});
        CHECK(sig.u == Approx(-0.2));
    }
}

TEST_CASE("closed-loop equilibria", "[controller]") {
    SECTION("unloaded pi system rests at the origin") {
        const ControllerConfig cfg = validate_controller(fixtures::pi_controller(), 2);
        const Equilibrium eq = closed_loop_equilibrium(cfg, 0.0, 0.05);
        CHECK(eq.omega_bar == 0.0);
        CHECK(eq.chi_bar == 0.0);
        CHECK(eq.upsilon_bar[0] == 0.0);
    }
    SECTION("pi equilibrium under load") {
        const ControllerConfig cfg = validate_controller(fixtures::pi_controller(), 2);
        const Equilibrium eq = closed_loop_equilibrium(cfg, 0.5, 0.05);
        CHECK(eq.omega_bar == 0.0);
        CHECK(eq.chi_bar == Approx(-1.0 / 3.0));
        CHECK(eq.upsilon_bar[0] == Approx(1.0 / 6.0));
        CHECK(eq.upsilon_bar[1] == Approx(1.0 / 3.0));
    }
    SECTION("proportional offset") {
        ControllerConfig cfg = fixtures::pi_controller();
        cfg.beta = 0.0;
        const ControllerConfig prop = validate_controller(cfg, 2);
        const Equilibrium eq = closed_loop_equilibrium(prop, 0.5, 0.05);
        CHECK(eq.omega_bar == Approx(-2.5));
    }
    SECTION("dual-pi splits the load by alpha/beta") {
        ControllerConfig cfg = fixtures::pi_controller();
        cfg.mode = ControllerMode::DualPi;
        cfg.alpha = 1.0;
        const Equilibrium eq = closed_loop_equilibrium(cfg, 0.5, 0.05);
        CHECK(eq.u_bar_eq == Approx(0.2));
        CHECK(eq.v_bar == Approx(0.3));
        CHECK(eq.u_bar_eq / eq.v_bar == Approx(2.0 / 3.0).epsilon(1e-12));
    }
    SECTION("zero gain divisions are guarded") {
        ControllerConfig cfg = fixtures::pi_controller();
        cfg.beta = 0.0;  // bypass validation on purpose
        CHECK_THROWS_AS((void)closed_loop_equilibrium(cfg, 0.5, 0.05), Error);
    }
}

TEST_CASE("lyapunov value and dissipation", "[controller]") {
    const ControllerConfig cfg = validate_controller(fixtures::pi_controller(), 2);
    const Equilibrium eq = closed_loop_equilibrium(cfg, 0.0, 0.05);

    SECTION("zero at the equilibrium") {
        CHECK(lyapunov_value(cfg, MicrogridState{eq.omega_bar, eq.chi_bar}, eq, 0.1) == 0.0);
    }
    SECTION("hand value") {
        // M=0.1, omega=1, beta=1.5, chi offset 2: 0.05 + 3.0
        CHECK(lyapunov_value(cfg, MicrogridState{1.0, eq.chi_bar + 2.0}, eq, 0.1) ==
              Approx(3.05));
    }
    SECTION("even in omega") {
        const double plus = lyapunov_value(cfg, MicrogridState{0.8, 0.3}, eq, 0.1);
        const double minus = lyapunov_value(cfg, MicrogridState{-0.8, 0.3}, eq, 0.1);
        CHECK(plus == minus);
    }
    SECTION("dissipation values") {
        CHECK(lyapunov_dissipation(cfg, MicrogridState{0.0, 0.0}, eq, 0.05) == 0.0);
        CHECK(lyapunov_dissipation(cfg, MicrogridState{2.0, 0.0}, eq, 0.05) == Approx(-0.8));
    }
    SECTION("dissipation is never positive") {
        oracles::Uniform rng(11);
        for (int i = 0; i < 200; ++i) {
            const MicrogridState x{rng.next(-5.0, 5.0), rng.next(-5.0, 5.0)};
            CHECK(lyapunov_dissipation(cfg, x, eq, 0.05) <= 0.0);
        }
    }
}
