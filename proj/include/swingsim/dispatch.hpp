#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "swingsim/errors.hpp"

namespace swingsim {

/// Diagonal quadratic cost C(Y) = 1/2 * sum_i lambda_i * Y_i^2 on the steady
/// inverter injections. Entries must be strictly positive.
struct CostMatrix {
    std::vector<double> lambda;

    [[nodiscard]] std::size_t size() const noexcept { return lambda.size(); }

    void validate() const {
        if (lambda.empty()) {
            throw Error(ErrorCode::NonpositiveCost, "cost matrix is empty");
        }
        for (double entry : lambda) {
            if (!(entry > 0.0) || !std::isfinite(entry)) {
                throw Error(ErrorCode::NonpositiveCost,
                            "cost coefficients must be finite and > 0");
            }
        }
    }
};

struct OptimalDispatch {
    std::vector<double> xi_opt;
    std::vector<double> upsilon_bar;
    double mu = 0.0;     // Lagrange multiplier of the balance constraint
    double cost = 0.0;   // C(upsilon_bar)
};

[[nodiscard]] inline double injection_cost(const CostMatrix& costs,
                                           const std::vector<double>& upsilon) {
    double total = 0.0;
    for (std::size_t i = 0; i < upsilon.size(); ++i) {
        total += costs.lambda[i] * upsilon[i] * upsilon[i];
    }
    return 0.5 * total;
}

/// Cost-minimizing sharing vector: xi_i proportional to 1/lambda_i,
/// normalized to sum to one. Invariant under scaling all costs by c > 0.
[[nodiscard]] inline std::vector<double> optimal_sharing(const CostMatrix& costs) {
    costs.validate();
    std::vector<double> xi(costs.size());
    double inv_sum = 0.0;
    for (std::size_t i = 0; i < costs.size(); ++i) {
        xi[i] = 1.0 / costs.lambda[i];
        inv_sum += xi[i];
    }
    for (double& entry : xi) {
        entry /= inv_sum;
    }
    return xi;
}

/// Minimizer of C(Y) subject to 0 = u_bar + 1^T Y - sum_delta:
/// Y = (sum_delta - u_bar) * xi_opt, with multiplier
/// mu = (u_bar - sum_delta) / (1^T Lambda^-1 1).
[[nodiscard]] inline OptimalDispatch optimal_injection(const CostMatrix& costs,
                                                       double u_bar,
                                                       double sum_delta) {
    costs.validate();
    OptimalDispatch out;
    out.xi_opt = optimal_sharing(costs);
    double inv_sum = 0.0;
    for (double lambda : costs.lambda) {
        inv_sum += 1.0 / lambda;
    }
    const double shortfall = sum_delta - u_bar;
    out.mu = -shortfall / inv_sum;
    out.upsilon_bar.resize(costs.size());
    for (std::size_t i = 0; i < costs.size(); ++i) {
        out.upsilon_bar[i] = shortfall * out.xi_opt[i];
    }
    out.cost = injection_cost(costs, out.upsilon_bar);
    return out;
}

/// Brute-force check of optimal_injection: exhaustively sweeps the affine
/// constraint set 1^T Y = sum_delta - u_bar, each free coordinate over
/// [-2|s|-1, 2|s|+1] at the given spacing, and returns the grid minimizer.
/// Exponential in the inverter count, so capped at 4 inverters. Kept
/// deliberately independent of the closed form above.
[[nodiscard]] inline OptimalDispatch oracle_optimal_injection(const CostMatrix& costs,
                                                              double u_bar,
                                                              double sum_delta,
                                                              double resolution) {
    costs.validate();
    if (costs.size() > 4) {
        throw Error(ErrorCode::DimensionTooLarge,
                    "oracle supports at most 4 inverters, got " + std::to_string(costs.size()));
    }
    if (!(resolution > 0.0)) {
        throw Error(ErrorCode::NonpositiveParameter, "oracle resolution must be > 0");
    }

    const double shortfall = sum_delta - u_bar;
    const double half_span = 2.0 * std::abs(shortfall) + 1.0;
    const auto points = static_cast<std::size_t>(std::floor(2.0 * half_span / resolution)) + 1;
    const std::size_t free_dims = costs.size() - 1;

    std::vector<double> current(costs.size(), 0.0);
    std::vector<double> best(costs.size(), 0.0);
    double best_cost = std::numeric_limits<double>::infinity();

    std::vector<std::size_t> index(free_dims, 0);
    bool done = false;
    while (!done) {
        double partial = 0.0;
        for (std::size_t d = 0; d < free_dims; ++d) {
            current[d] = -half_span + static_cast<double>(index[d]) * resolution;
            partial += current[d];
        }
        current[free_dims] = shortfall - partial;  // last coordinate closes the constraint
        const double cost = injection_cost(costs, current);
        if (cost < best_cost) {
            best_cost = cost;
            best = current;
        }

        if (free_dims == 0) {
            break;
        }
        std::size_t d = 0;
        while (d < free_dims) {
            if (++index[d] < points) {
                break;
            }
            index[d] = 0;
            ++d;
        }
        done = (d == free_dims);
    }

    OptimalDispatch out;
    out.upsilon_bar = best;
    out.cost = best_cost;
    const double total = shortfall;
    out.xi_opt.resize(costs.size(), 0.0);
    if (total != 0.0) {
        for (std::size_t i = 0; i < costs.size(); ++i) {
            out.xi_opt[i] = best[i] / total;
        }
    }
    // Multiplier recovered from the grid minimizer: at the optimum,
    // lambda_i * Y_i = -mu for every coordinate.
    out.mu = -costs.lambda[0] * best[0];
    return out;
}

struct RatioEntry {
    std::size_t i = 0;
    std::size_t j = 0;
    double power_ratio = 0.0;   // (P_I_i* + Y_i) / (P_I_j* + Y_j)
    double xi_ratio = 0.0;      // xi_i / xi_j
    double relative_mismatch = 0.0;
};

struct ProportionalityReport {
    bool pairwise_applicable = false;   // only meaningful when xi tracks nominal powers
    std::vector<RatioEntry> pairwise;
    double max_pairwise_mismatch = 0.0;
    bool pairwise_ok = true;

    bool generator_applicable = false;
    bool generator_premise_holds = false;  // alpha/beta equals P_G*/sum(P_I*)
    double generator_ratio = 0.0;       // (P_G* + u_bar_eq) / (sum P_I* + v_bar)
    double alpha_beta_ratio = 0.0;
    double generator_mismatch = 0.0;
    bool generator_ok = true;
};

inline constexpr double kProportionalityTolerance = 1e-9;

/// Checks the steady-state proportionality claims: per-pair total inverter
/// power ratios against xi ratios (meaningful when xi is proportional to the
/// nominal powers), and the generator-to-inverters total against alpha/beta
/// when the dual-controller quantities are supplied (alpha > 0 or beta > 0).
[[nodiscard]] inline ProportionalityReport proportionality_report(
    const std::vector<double>& inverter_nominal,
    const std::vector<double>& upsilon,
    const std::vector<double>& xi,
    double generator_nominal = 0.0,
    double u_bar_eq = 0.0,
    double v_bar = 0.0,
    double alpha = 0.0,
    double beta = 0.0) {
    if (inverter_nominal.size() != upsilon.size() || xi.size() != upsilon.size()) {
        throw Error(ErrorCode::DimensionMismatch, "proportionality inputs disagree in length");
    }

    ProportionalityReport report;

    double nominal_sum = 0.0;
    for (double p : inverter_nominal) {
        nominal_sum += p;
    }
    // Pairwise ratios only follow from Y = v*xi when xi = P_I*/sum(P_I*).
    report.pairwise_applicable = nominal_sum > 0.0;
    if (report.pairwise_applicable) {
        for (std::size_t i = 0; i < xi.size(); ++i) {
            if (std::abs(xi[i] - inverter_nominal[i] / nominal_sum) > kProportionalityTolerance) {
                report.pairwise_applicable = false;
                break;
            }
        }
    }

    if (report.pairwise_applicable) {
        for (std::size_t i = 0; i < upsilon.size(); ++i) {
            for (std::size_t j = i + 1; j < upsilon.size(); ++j) {
                const double denom_power = inverter_nominal[j] + upsilon[j];
                if (denom_power == 0.0 || xi[j] == 0.0) {
                    throw Error(ErrorCode::ZeroDenominator,
                                "total power or xi entry of inverter " + std::to_string(j) +
                                    " is zero");
                }
                RatioEntry entry;
                entry.i = i;
                entry.j = j;
                entry.power_ratio = (inverter_nominal[i] + upsilon[i]) / denom_power;
                entry.xi_ratio = xi[i] / xi[j];
                const double scale = std::max(std::abs(entry.xi_ratio), 1e-300);
                entry.relative_mismatch = std::abs(entry.power_ratio - entry.xi_ratio) / scale;
                report.max_pairwise_mismatch =
                    std::max(report.max_pairwise_mismatch, entry.relative_mismatch);
                report.pairwise.push_back(entry);
            }
        }
        report.pairwise_ok = report.max_pairwise_mismatch <= kProportionalityTolerance;
    }

    report.generator_applicable = alpha > 0.0 && beta > 0.0;
    if (report.generator_applicable) {
        const double denom = nominal_sum + v_bar;
        if (denom == 0.0) {
            throw Error(ErrorCode::ZeroDenominator, "total inverter power is zero");
        }
        report.generator_ratio = (generator_nominal + u_bar_eq) / denom;
        report.alpha_beta_ratio = alpha / beta;
        report.generator_mismatch =
            std::abs(report.generator_ratio - report.alpha_beta_ratio) /
            std::max(std::abs(report.alpha_beta_ratio), 1e-300);
        report.generator_ok = report.generator_mismatch <= kProportionalityTolerance;
        // The equality is only promised when alpha/beta matches the nominal split.
        report.generator_premise_holds =
            nominal_sum > 0.0 &&
            std::abs(alpha / beta - generator_nominal / nominal_sum) <=
                kProportionalityTolerance * std::max(1.0, std::abs(alpha / beta));
    }
    return report;
}

}  // namespace swingsim
