#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "swingsim/errors.hpp"

namespace swingsim {

/// Everything is expressed in the per-unit system; frequencies are
/// deviations from nominal, so the nominal frequency never appears.

struct GeneratorSpec {
    std::string id;
    double inertia = 0.0;         // M, per-unit angular momentum
    double damping = 0.0;         // D, per-unit
    double nominal_power = 0.0;   // P_G*
};

struct InverterSpec {
    std::string id;
    double nominal_power = 0.0;   // P_I*
};

struct LoadSpec {
    std::string id;
    double nominal_power = 0.0;   // P_L*
};

using NodeSpec = std::variant<GeneratorSpec, InverterSpec, LoadSpec>;

[[nodiscard]] inline const std::string& node_id(const NodeSpec& node) {
    return std::visit([](const auto& n) -> const std::string& { return n.id; }, node);
}

struct EdgeSpec {
    std::string from;
    std::string to;
    double reactance = 0.0;   // per-unit; carried for the device tier, unused by the reduced model
};

/// Raw, possibly-invalid network description as read from a config file.
struct NetworkSpec {
    std::vector<NodeSpec> nodes;
    std::vector<EdgeSpec> edges;
};

/// Dynamic state of the reduced model. `chi` is a controller variable and is
/// deliberately not wrapped to [0, 2*pi).
struct MicrogridState {
    double omega = 0.0;   // frequency deviation
    double chi = 0.0;     // controller integrator
};

/// Signed per-unit deviations from nominal load consumption, one entry per
/// load node in network order. Negative entries model load relief.
struct LoadDeviation {
    std::vector<double> delta;

    [[nodiscard]] double sum() const {
        return std::accumulate(delta.begin(), delta.end(), 0.0);
    }
};

/// Sum of the per-load deviations, the aggregate term the reduced dynamics see.
[[nodiscard]] inline double aggregate_load_deviation(const LoadDeviation& dev) {
    return dev.sum();
}

struct PowerFlows {
    double generator_output = 0.0;          // P_e
    std::vector<double> inverter_injection; // P_I
    std::vector<double> load_consumption;   // P_L

    /// P_e + sum(P_I) - sum(P_L); zero up to rounding by construction.
    [[nodiscard]] double balance_residual() const {
        double sum_inv = std::accumulate(inverter_injection.begin(), inverter_injection.end(), 0.0);
        double sum_load = std::accumulate(load_consumption.begin(), load_consumption.end(), 0.0);
        return generator_output + sum_inv - sum_load;
    }
};

inline constexpr double kNominalBalanceTolerance = 1e-9;
inline constexpr double kSharingNormalizationTolerance = 1e-9;

/// A NetworkSpec that passed validation, with the node partition cached.
/// Immutable after construction; safe to share across threads.
class Network {
public:
    [[nodiscard]] const NetworkSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] const GeneratorSpec& generator() const noexcept { return generator_; }
    [[nodiscard]] std::size_t inverter_count() const noexcept { return inverter_nominal_.size(); }
    [[nodiscard]] std::size_t load_count() const noexcept { return load_nominal_.size(); }
    [[nodiscard]] const std::vector<double>& inverter_nominal() const noexcept { return inverter_nominal_; }
    [[nodiscard]] const std::vector<double>& load_nominal() const noexcept { return load_nominal_; }
    [[nodiscard]] const std::vector<std::string>& inverter_ids() const noexcept { return inverter_ids_; }
    [[nodiscard]] const std::vector<std::string>& load_ids() const noexcept { return load_ids_; }

    /// Index of a load node within the load partition.
    [[nodiscard]] std::size_t load_index(const std::string& id) const {
        auto it = std::find(load_ids_.begin(), load_ids_.end(), id);
        if (it == load_ids_.end()) {
            throw Error(ErrorCode::UnknownNode, "no load node with id '" + id + "'");
        }
        return static_cast<std::size_t>(it - load_ids_.begin());
    }

    friend Network validate_network(NetworkSpec spec);

private:
    Network() = default;

    NetworkSpec spec_;
    GeneratorSpec generator_;
    std::vector<double> inverter_nominal_;
    std::vector<double> load_nominal_;
    std::vector<std::string> inverter_ids_;
    std::vector<std::string> load_ids_;
};

/// Checks connectivity, the node partition (exactly one generator, at least
/// one inverter), parameter signs, and the nominal power balance
/// P_G* + sum(P_I*) - sum(P_L*) = 0.
[[nodiscard]] inline Network validate_network(NetworkSpec spec) {
    Network net;

    std::unordered_map<std::string, std::size_t> index_of;
    index_of.reserve(spec.nodes.size());
    for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
        const std::string& id = node_id(spec.nodes[i]);
        if (id.empty()) {
            throw Error(ErrorCode::SchemaError, "node with empty id");
        }
        if (!index_of.emplace(id, i).second) {
            throw Error(ErrorCode::DuplicateNodeId, "duplicate node id '" + id + "'");
        }
    }

    bool have_generator = false;
    for (const NodeSpec& node : spec.nodes) {
        if (const auto* gen = std::get_if<GeneratorSpec>(&node)) {
            if (have_generator) {
                throw Error(ErrorCode::MultipleGenerators,
                            "second generator '" + gen->id + "' (exactly one master allowed)");
            }
            have_generator = true;
            if (!(gen->inertia > 0.0)) {
                throw Error(ErrorCode::NonpositiveParameter,
                            "generator '" + gen->id + "' requires M > 0");
            }
            if (!(gen->damping > 0.0)) {
                throw Error(ErrorCode::NonpositiveParameter,
                            "generator '" + gen->id + "' requires D > 0");
            }
            if (gen->nominal_power < 0.0) {
                throw Error(ErrorCode::NonpositiveParameter,
                            "generator '" + gen->id + "' requires P* >= 0");
            }
            net.generator_ = *gen;
        } else if (const auto* inv = std::get_if<InverterSpec>(&node)) {
            if (inv->nominal_power < 0.0) {
                throw Error(ErrorCode::NonpositiveParameter,
                            "inverter '" + inv->id + "' requires P* >= 0");
            }
            net.inverter_ids_.push_back(inv->id);
            net.inverter_nominal_.push_back(inv->nominal_power);
        } else {
            const auto& load = std::get<LoadSpec>(node);
            if (load.nominal_power < 0.0) {
                throw Error(ErrorCode::NonpositiveParameter,
                            "load '" + load.id + "' requires P* >= 0");
            }
            net.load_ids_.push_back(load.id);
            net.load_nominal_.push_back(load.nominal_power);
        }
    }
    if (!have_generator) {
        throw Error(ErrorCode::MissingGenerator, "network needs exactly one generator node");
    }
    if (net.inverter_ids_.empty()) {
        throw Error(ErrorCode::NoInverters, "network needs at least one inverter node");
    }

    // Undirected adjacency; edges must reference known nodes, carry positive
    // reactance, and not form self-loops.
    std::vector<std::vector<std::size_t>> adjacency(spec.nodes.size());
    for (const EdgeSpec& edge : spec.edges) {
        auto from = index_of.find(edge.from);
        auto to = index_of.find(edge.to);
        if (from == index_of.end() || to == index_of.end()) {
            throw Error(ErrorCode::UnknownNode,
                        "edge (" + edge.from + ", " + edge.to + ") references an unknown node");
        }
        if (from->second == to->second) {
            throw Error(ErrorCode::SelfLoop, "self-loop on node '" + edge.from + "'");
        }
        if (!(edge.reactance > 0.0)) {
            throw Error(ErrorCode::NonpositiveParameter,
                        "edge (" + edge.from + ", " + edge.to + ") requires reactance > 0");
        }
        adjacency[from->second].push_back(to->second);
        adjacency[to->second].push_back(from->second);
    }

    // BFS from node 0; every node must be reachable.
    if (spec.nodes.size() > 1) {
        std::vector<bool> seen(spec.nodes.size(), false);
        std::vector<std::size_t> frontier{0};
        seen[0] = true;
        std::size_t reached = 1;
        while (!frontier.empty()) {
            std::size_t at = frontier.back();
            frontier.pop_back();
            for (std::size_t next : adjacency[at]) {
                if (!seen[next]) {
                    seen[next] = true;
                    ++reached;
                    frontier.push_back(next);
                }
            }
        }
        if (reached != spec.nodes.size()) {
            throw Error(ErrorCode::DisconnectedGraph,
                        "graph has unreachable nodes (" +
                            std::to_string(spec.nodes.size() - reached) + " of " +
                            std::to_string(spec.nodes.size()) + ")");
        }
    }

    const double residual = net.generator_.nominal_power +
                            std::accumulate(net.inverter_nominal_.begin(), net.inverter_nominal_.end(), 0.0) -
                            std::accumulate(net.load_nominal_.begin(), net.load_nominal_.end(), 0.0);
    if (std::abs(residual) > kNominalBalanceTolerance) {
        throw Error(ErrorCode::NominalImbalance,
                    "nominal powers do not balance, residual = " + std::to_string(residual));
    }

    net.spec_ = std::move(spec);
    return net;
}

/// Per-unit flows for a given inverter common signal `v` and sharing vector
/// `xi`: P_I = P_I* + v*xi, P_L = P_L* + delta, and P_e closes the balance.
[[nodiscard]] inline PowerFlows power_flows(const Network& net,
                                            const LoadDeviation& dev,
                                            double v,
                                            const std::vector<double>& xi) {
    if (xi.size() != net.inverter_count()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "sharing vector has " + std::to_string(xi.size()) + " entries for " +
                        std::to_string(net.inverter_count()) + " inverters");
    }
    if (dev.delta.size() != net.load_count()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "load deviation has " + std::to_string(dev.delta.size()) + " entries for " +
                        std::to_string(net.load_count()) + " loads");
    }
    const double xi_sum = std::accumulate(xi.begin(), xi.end(), 0.0);
    if (std::abs(xi_sum - 1.0) > kSharingNormalizationTolerance) {
        throw Error(ErrorCode::SharingVectorUnnormalized,
                    "sharing vector sums to " + std::to_string(xi_sum));
    }

    PowerFlows flows;
    flows.inverter_injection.resize(net.inverter_count());
    flows.load_consumption.resize(net.load_count());
    double sum_inv = 0.0;
    for (std::size_t i = 0; i < net.inverter_count(); ++i) {
        flows.inverter_injection[i] = net.inverter_nominal()[i] + v * xi[i];
        sum_inv += flows.inverter_injection[i];
    }
    double sum_load = 0.0;
    for (std::size_t i = 0; i < net.load_count(); ++i) {
        flows.load_consumption[i] = net.load_nominal()[i] + dev.delta[i];
        sum_load += flows.load_consumption[i];
    }
    flows.generator_output = sum_load - sum_inv;
    return flows;
}

/// Right-hand side of the reduced scalar dynamics
///     M * domega/dt = u + v - sum_delta - D * omega,
/// with dchi/dt = omega alongside. `v` already contains any proportional
/// term, so the damping here is the bare D.
[[nodiscard]] inline double reduced_dynamics(const MicrogridState& state,
                                             double u,
                                             double v,
                                             double sum_delta,
                                             double inertia,
                                             double damping) {
    if (!(inertia > 0.0)) {
        throw Error(ErrorCode::NonpositiveInertia, "M must be > 0");
    }
    return (u + v - sum_delta - damping * state.omega) / inertia;
}

}  // namespace swingsim
