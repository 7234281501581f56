#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "support/oracles.hpp"
#include "swingsim/dispatch.hpp"

using namespace swingsim;
using Catch::Approx;

TEST_CASE("optimal sharing closed form", "[dispatch]") {
    SECTION("equal costs share equally") {
        const std::vector<double> xi = optimal_sharing(CostMatrix{{1.0, 1.0}});
        CHECK(xi[0] == Approx(0.5));
        CHECK(xi[1] == Approx(0.5));
    }
    SECTION("two coefficients, grid-search confirmed") {
        const std::vector<double> xi = optimal_sharing(CostMatrix{{1.0, 2.0}});
        CHECK(xi[0] == Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(xi[1] == Approx(1.0 / 3.0).epsilon(1e-12));
        const std::vector<double> grid = oracles::sharing_grid_minimizer({1.0, 2.0}, 1e-4);
        CHECK(std::abs(grid[0] - xi[0]) <= 1e-4);
        CHECK(std::abs(grid[1] - xi[1]) <= 1e-4);
    }
    SECTION("three coefficients on the simplex") {
        const std::vector<double> xi = optimal_sharing(CostMatrix{{2.0, 3.0, 6.0}});
        CHECK(xi[0] == Approx(0.5).epsilon(1e-12));
        CHECK(xi[1] == Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(xi[2] == Approx(1.0 / 6.0).epsilon(1e-12));
        const std::vector<double> grid = oracles::sharing_grid_minimizer({2.0, 3.0, 6.0}, 1e-4);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(std::abs(grid[i] - xi[i]) <= 1e-4);
        }
    }
    SECTION("nonpositive costs are rejected") {
        CHECK_THROWS_AS((void)optimal_sharing(CostMatrix{{1.0, 0.0}}), Error);
        CHECK_THROWS_AS((void)optimal_sharing(CostMatrix{{}}), Error);
    }
    SECTION("scale invariance") {
        oracles::Uniform rng(42);
        for (int trial = 0; trial < 50; ++trial) {
            CostMatrix costs{{rng.next(0.1, 10.0), rng.next(0.1, 10.0), rng.next(0.1, 10.0)}};
            const double scale = rng.next(0.01, 100.0);
            CostMatrix scaled = costs;
            for (double& lambda : scaled.lambda) {
                lambda *= scale;
            }
            const std::vector<double> a = optimal_sharing(costs);
            const std::vector<double> b = optimal_sharing(scaled);
            for (std::size_t i = 0; i < a.size(); ++i) {
                CHECK(a[i] == Approx(b[i]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("optimal injection closed form", "[dispatch]") {
    SECTION("no shortfall, no dispatch") {
        const OptimalDispatch opt = optimal_injection(CostMatrix{{1.0, 2.0}}, 0.5, 0.5);
        CHECK(opt.upsilon_bar[0] == 0.0);
        CHECK(opt.upsilon_bar[1] == 0.0);
        CHECK(opt.cost == 0.0);
    }
    SECTION("hand example") {
        const OptimalDispatch opt = optimal_injection(CostMatrix{{1.0, 2.0}}, 0.0, 0.5);
        CHECK(opt.upsilon_bar[0] == Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(opt.upsilon_bar[1] == Approx(1.0 / 6.0).epsilon(1e-12));
        CHECK(opt.mu == Approx(-1.0 / 3.0).epsilon(1e-12));
    }
    SECTION("negative shortfall backs the inverters off") {
        const OptimalDispatch opt = optimal_injection(CostMatrix{{1.0, 1.0}}, 1.0, 0.5);
        CHECK(opt.upsilon_bar[0] == Approx(-0.25));
        CHECK(opt.upsilon_bar[1] == Approx(-0.25));
    }
    SECTION("balance constraint holds") {
        oracles::Uniform rng(7);
        for (int trial = 0; trial < 100; ++trial) {
            const CostMatrix costs{{rng.next(0.1, 10.0), rng.next(0.1, 10.0)}};
            const double u_bar = rng.next(-1.0, 1.0);
            const double sum_delta = rng.next(-1.0, 1.0);
            const OptimalDispatch opt = optimal_injection(costs, u_bar, sum_delta);
            const double residual =
                u_bar + opt.upsilon_bar[0] + opt.upsilon_bar[1] - sum_delta;
            CHECK(std::abs(residual) < 1e-12);
        }
    }
}

TEST_CASE("brute-force injection oracle", "[dispatch]") {
    SECTION("agrees with the closed form") {
        const CostMatrix costs{{1.0, 2.0}};
        const OptimalDispatch analytic = optimal_injection(costs, 0.0, 0.5);
        const OptimalDispatch grid = oracle_optimal_injection(costs, 0.0, 0.5, 1e-4);
        CHECK(std::abs(grid.upsilon_bar[0] - analytic.upsilon_bar[0]) <= 1e-4);
        CHECK(std::abs(grid.upsilon_bar[1] - analytic.upsilon_bar[1]) <= 1e-4);
        CHECK(analytic.cost <= grid.cost + 1e-15);
    }
    SECTION("symmetric costs give a symmetric minimizer") {
        const OptimalDispatch grid = oracle_optimal_injection(CostMatrix{{3.0, 3.0}}, 0.0, 1.0, 1e-3);
        CHECK(grid.upsilon_bar[0] == Approx(grid.upsilon_bar[1]).margin(1e-3));
    }
    SECTION("grid minimizer beats random feasible points") {
        const CostMatrix costs{{1.0, 4.0, 2.0}};
        const double u_bar = 0.2;
        const double sum_delta = 0.7;
        const OptimalDispatch grid = oracle_optimal_injection(costs, u_bar, sum_delta, 5e-3);
        oracles::Uniform rng(99);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> feasible{rng.next(-1.5, 1.5), rng.next(-1.5, 1.5), 0.0};
            feasible[2] = (sum_delta - u_bar) - feasible[0] - feasible[1];
            CHECK(grid.cost <= injection_cost(costs, feasible) + 1e-12);
        }
    }
    SECTION("dimension cap") {
        CHECK_THROWS_AS(
            (void)oracle_optimal_injection(CostMatrix{{1, 1, 1, 1, 1}}, 0.0, 0.5, 0.1), Error);
    }
}

TEST_CASE("proportionality report", "[dispatch]") {
    SECTION("xi proportional to nominals keeps total powers proportional") {
        const std::vector<double> nominal{1.0, 2.0};
        const std::vector<double> xi{1.0 / 3.0, 2.0 / 3.0};
        std::vector<double> upsilon{0.5 * xi[0], 0.5 * xi[1]};
        const ProportionalityReport report = proportionality_report(nominal, upsilon, xi);
        REQUIRE(report.pairwise_applicable);
        REQUIRE(report.pairwise.size() == 1);
        CHECK(report.pairwise[0].power_ratio == Approx(0.5).epsilon(1e-12));
        CHECK(report.pairwise[0].xi_ratio == Approx(0.5).epsilon(1e-12));
        CHECK(report.pairwise_ok);
    }
    SECTION("zero deviations reduce to the nominal ratios") {
        const std::vector<double> nominal{1.0, 2.0};
        const std::vector<double> xi{1.0 / 3.0, 2.0 / 3.0};
        const ProportionalityReport report =
            proportionality_report(nominal, {0.0, 0.0}, xi);
        CHECK(report.pairwise[0].power_ratio == Approx(0.5).epsilon(1e-12));
        CHECK(report.pairwise_ok);
    }
    SECTION("generator-to-inverter ratio matches alpha/beta at the dual-pi equilibrium") {
        // alpha/beta chosen equal to P_G*/sum(P_I*) = 1/3.
        const double alpha = 0.5;
        const double beta = 1.5;
        const double sum_delta = 0.5;
        const double u_bar_eq = alpha * sum_delta / (alpha + beta);
        const double v_bar = beta * sum_delta / (alpha + beta);
        const ProportionalityReport report = proportionality_report(
            {1.0, 2.0}, {v_bar / 3.0, 2.0 * v_bar / 3.0}, {1.0 / 3.0, 2.0 / 3.0}, 1.0,
            u_bar_eq, v_bar, alpha, beta);
        REQUIRE(report.generator_applicable);
        CHECK(report.generator_premise_holds);
        CHECK(report.generator_ratio == Approx(alpha / beta).epsilon(1e-12));
        CHECK(report.generator_ok);
    }
    SECTION("zero denominators are reported") {
        CHECK_THROWS_AS((void)proportionality_report({1.0, 2.0}, {0.0, -2.0},
                                                      {1.0 / 3.0, 2.0 / 3.0}),
                        Error);
    }
    SECTION("pairwise check is skipped when xi does not track nominals") {
        const ProportionalityReport report =
            proportionality_report({1.0, 1.0}, {0.1, 0.3}, {0.25, 0.75});
        CHECK_FALSE(report.pairwise_applicable);
        CHECK(report.pairwise.empty());
    }
}
