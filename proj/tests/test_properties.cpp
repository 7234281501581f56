#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "swingsim/swingsim.hpp"

using namespace swingsim;
using Catch::Approx;

namespace {

ControllerConfig random_config(oracles::Uniform& rng, ControllerMode mode) {
    ControllerConfig cfg;
    cfg.mode = mode;
    cfg.gamma = rng.next(0.05, 2.0);
    cfg.u_bar = rng.next(-1.0, 1.0);
    if (mode == ControllerMode::ConstantInputPi) {
        cfg.beta = rng.next(0.1, 3.0);
    } else if (mode == ControllerMode::DualPi) {
        cfg.alpha = rng.next(0.1, 3.0);
        cfg.beta = rng.next(0.1, 3.0);
        cfg.u_bar = 0.0;
    }
    const double split = rng.next(0.1, 0.9);
    cfg.xi = {split, 1.0 - split};
    return cfg;
}

}  // namespace

TEST_CASE("reduced dynamics is affine in its inputs", "[property]") {
    oracles::Uniform rng(101);
    const double inertia = 0.1;
    const double damping = 0.05;
    for (int trial = 0; trial < 200; ++trial) {
        const MicrogridState xa{rng.next(-2, 2), rng.next(-2, 2)};
        const MicrogridState xb{rng.next(-2, 2), rng.next(-2, 2)};
        const double ua = rng.next(-2, 2);
        const double ub = rng.next(-2, 2);
        const double va = rng.next(-2, 2);
        const double vb = rng.next(-2, 2);
        const double da = rng.next(-2, 2);
        const double db = rng.next(-2, 2);
        const double c = rng.next(-3, 3);

        const double fa = reduced_dynamics(xa, ua, va, da, inertia, damping);
        const double fb = reduced_dynamics(xb, ub, vb, db, inertia, damping);
        const MicrogridState mix{xa.omega + c * xb.omega, xa.chi + c * xb.chi};
        const double fmix = reduced_dynamics(mix, ua + c * ub, va + c * vb, da + c * db,
                                             inertia, damping);
        // Superposition over the affine structure, minus the doubled constant.
        const double f0 = reduced_dynamics(MicrogridState{0, 0}, 0, 0, 0, inertia, damping);
        CHECK(fmix == Approx(fa + c * fb - c * f0).margin(1e-10));
    }
}

TEST_CASE("signal identities hold for every mode", "[property]") {
    oracles::Uniform rng(202);
    for (ControllerMode mode : {ControllerMode::ConstantInputPi, ControllerMode::Proportional,
                                ControllerMode::DualPi}) {
        for (int trial = 0; trial < 100; ++trial) {
            const ControllerConfig cfg = random_config(rng, mode);
            const MicrogridState x{rng.next(-3, 3), rng.next(-3, 3)};
            const ControlSignals sig = control_signals(cfg, x);
            CHECK(sig.v == Approx(sig.v1 + sig.v2).margin(1e-15));
            const double upsilon_sum = sig.upsilon[0] + sig.upsilon[1];
            CHECK(upsilon_sum == Approx(sig.v).margin(1e-12));
            // Injections hold the sharing ratio whenever v is nonzero.
            if (std::abs(sig.v) > 1e-9) {
                CHECK(sig.upsilon[0] / sig.upsilon[1] ==
                      Approx(cfg.xi[0] / cfg.xi[1]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("closed-loop rhs matches the core-model route", "[property]") {
    // Two algebraic routes to the same derivative: the substituted closed-loop
    // form used by the integrator, and control_signals plugged into the
    // reduced dynamics.
    oracles::Uniform rng(303);
    const GeneratorSpec gen{"sg", 0.1, 0.05, 1.0};
    for (ControllerMode mode : {ControllerMode::ConstantInputPi, ControllerMode::Proportional,
                                ControllerMode::DualPi}) {
        for (int trial = 0; trial < 100; ++trial) {
            const ControllerConfig cfg = random_config(rng, mode);
            const MicrogridState x{rng.next(-3, 3), rng.next(-3, 3)};
            const double sum_delta = rng.next(-1, 1);
            const detail::StateDerivative direct =
                detail::closed_loop_rhs(cfg, gen, x, cfg.u_bar, sum_delta);
            const ControlSignals sig = control_signals(cfg, x);
            const double via_model =
                reduced_dynamics(x, sig.u, sig.v, sum_delta, gen.inertia, gen.damping);
            CHECK(direct.domega == Approx(via_model).margin(1e-12));
        }
    }
}

TEST_CASE("equilibria zero the closed-loop right-hand side", "[property]") {
    oracles::Uniform rng(404);
    const GeneratorSpec gen{"sg", 0.1, 0.05, 1.0};
    for (ControllerMode mode : {ControllerMode::ConstantInputPi, ControllerMode::Proportional,
                                ControllerMode::DualPi}) {
        for (int trial = 0; trial < 100; ++trial) {
            const ControllerConfig cfg = random_config(rng, mode);
            const double sum_delta = rng.next(-1, 1);
            const Equilibrium eq = closed_loop_equilibrium(cfg, sum_delta, gen.damping);
            const MicrogridState at_eq{eq.omega_bar, eq.chi_bar};
            const detail::StateDerivative d =
                detail::closed_loop_rhs(cfg, gen, at_eq, cfg.u_bar, sum_delta);
            CHECK(std::abs(d.domega) < 1e-12);
            if (mode != ControllerMode::Proportional) {
                CHECK(std::abs(d.dchi) < 1e-12);
            }
        }
    }
}

TEST_CASE("lyapunov value is positive definite about the equilibrium", "[property]") {
    oracles::Uniform rng(505);
    const double inertia = 0.1;
    for (ControllerMode mode : {ControllerMode::ConstantInputPi, ControllerMode::Proportional,
                                ControllerMode::DualPi}) {
        for (int trial = 0; trial < 100; ++trial) {
            const ControllerConfig cfg = random_config(rng, mode);
            const double sum_delta = rng.next(-1, 1);
            const Equilibrium eq = closed_loop_equilibrium(cfg, sum_delta, 0.05);
            CHECK(lyapunov_value(cfg, MicrogridState{eq.omega_bar, eq.chi_bar}, eq, inertia) ==
                  0.0);
            const double d_omega = rng.next(-2, 2);
            const double d_chi = rng.next(-2, 2);
            if (std::abs(d_omega) < 1e-6 && std::abs(d_chi) < 1e-6) {
                continue;
            }
            const MicrogridState off{eq.omega_bar + d_omega, eq.chi_bar + d_chi};
            const double w = lyapunov_value(cfg, off, eq, inertia);
            if (mode == ControllerMode::Proportional) {
                // chi plays no role without integral action
                if (std::abs(d_omega) < 1e-6) {
                    continue;
                }
            }
            CHECK(w > 0.0);
        }
    }
}

TEST_CASE("chain rule reproduces the analytic dissipation", "[property]") {
    // d/dt W along the vector field, with the gradient taken by central
    // differences (exact for a quadratic W), must match -(D+gamma)(w-w_bar)^2.
    oracles::Uniform rng(606);
    const GeneratorSpec gen{"sg", 0.1, 0.05, 1.0};
    const double eps = 1e-4;
    for (ControllerMode mode : {ControllerMode::ConstantInputPi, ControllerMode::Proportional,
                                ControllerMode::DualPi}) {
        for (int trial = 0; trial < 100; ++trial) {
            const ControllerConfig cfg = random_config(rng, mode);
            const double sum_delta = rng.next(-1, 1);
            const Equilibrium eq = closed_loop_equilibrium(cfg, sum_delta, gen.damping);
            const MicrogridState x{rng.next(-3, 3), rng.next(-3, 3)};

            const auto w_of = [&](double omega, double chi) {
                return lyapunov_value(cfg, MicrogridState{omega, chi}, eq, gen.inertia);
            };
            const double dw_domega =
                (w_of(x.omega + eps, x.chi) - w_of(x.omega - eps, x.chi)) / (2.0 * eps);
            const double dw_dchi =
                (w_of(x.omega, x.chi + eps) - w_of(x.omega, x.chi - eps)) / (2.0 * eps);
            const detail::StateDerivative d =
                detail::closed_loop_rhs(cfg, gen, x, cfg.u_bar, sum_delta);
            const double chain = dw_domega * d.domega + dw_dchi * d.dchi;
            const double analytic = lyapunov_dissipation(cfg, x, eq, gen.damping);
            CHECK(chain == Approx(analytic).epsilon(1e-9).margin(1e-9));
        }
    }
}

TEST_CASE("steady injections hold the sharing ratio exactly", "[property]") {
    oracles::Uniform rng(707);
    for (int trial = 0; trial < 100; ++trial) {
        const ControllerConfig cfg = random_config(rng, ControllerMode::ConstantInputPi);
        const double sum_delta = rng.next(-1, 1);
        const Equilibrium eq = closed_loop_equilibrium(cfg, sum_delta, 0.05);
        if (std::abs(eq.v_bar) < 1e-9) {
            continue;
        }
        CHECK(eq.upsilon_bar[0] / eq.upsilon_bar[1] ==
              Approx(cfg.xi[0] / cfg.xi[1]).epsilon(1e-12));
        // closed form: upsilon_bar = -xi (u_bar - sum_delta)
        CHECK(eq.upsilon_bar[0] ==
              Approx(-cfg.xi[0] * (cfg.u_bar - sum_delta)).margin(1e-12));
    }
}

TEST_CASE("power flows conserve energy for arbitrary inputs", "[property]") {
    oracles::Uniform rng(808);
    const Network net = validate_network(fixtures::standard_network());
    for (int trial = 0; trial < 200; ++trial) {
        const double split = rng.next(-0.5, 1.5);
        const std::vector<double> xi{split, 1.0 - split};
        const LoadDeviation dev{{rng.next(-2, 2)}};
        const PowerFlows flows = power_flows(net, dev, rng.next(-3, 3), xi);
        CHECK(std::abs(flows.balance_residual()) < 1e-12);
    }
}

TEST_CASE("optimal sharing normalizes and matches nominal proportions", "[property]") {
    oracles::Uniform rng(909);
    for (int trial = 0; trial < 100; ++trial) {
        const CostMatrix costs{
            {rng.next(0.1, 10.0), rng.next(0.1, 10.0), rng.next(0.1, 10.0)}};
        const std::vector<double> xi = optimal_sharing(costs);
        double sum = 0.0;
        for (double entry : xi) {
            sum += entry;
        }
        CHECK(sum == Approx(1.0).margin(1e-12));
    }
    // Costs inverse to nominal powers make the optimal split track the
    // nominal proportions exactly.
    for (int trial = 0; trial < 50; ++trial) {
        const std::vector<double> nominal{rng.next(0.5, 3.0), rng.next(0.5, 3.0),
                                          rng.next(0.5, 3.0)};
        const double scale = rng.next(0.2, 5.0);
        CostMatrix costs{{scale / nominal[0], scale / nominal[1], scale / nominal[2]}};
        const std::vector<double> xi = optimal_sharing(costs);
        const double total = nominal[0] + nominal[1] + nominal[2];
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(xi[i] == Approx(nominal[i] / total).epsilon(1e-12));
        }
    }
}
