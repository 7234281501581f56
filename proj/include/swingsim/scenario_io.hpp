#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "swingsim/errors.hpp"
#include "swingsim/simulator.hpp"

namespace swingsim {

namespace detail {

using json = nlohmann::json;

[[nodiscard]] inline std::string line_column_of(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

inline void require_keys(const json& obj,
                         const std::string& path,
                         std::initializer_list<const char*> allowed,
                         std::initializer_list<const char*> required) {
    if (!obj.is_object()) {
        throw Error(ErrorCode::SchemaError, path + " must be an object");
    }
    for (const auto& [key, value] : obj.items()) {
        bool known = false;
        for (const char* name : allowed) {
            if (key == name) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw Error(ErrorCode::SchemaError, "unknown key '" + path + "." + key + "'");
        }
    }
    for (const char* name : required) {
        if (!obj.contains(name)) {
            throw Error(ErrorCode::SchemaError, "missing key '" + path + "." + name + "'");
        }
    }
}

inline const json& get_present(const json& obj, const std::string& path, const char* key) {
    if (!obj.is_object() || !obj.contains(key)) {
        throw Error(ErrorCode::SchemaError, "missing key '" + path + "." + key + "'");
    }
    return obj.at(key);
}

[[nodiscard]] inline double get_number(const json& obj, const std::string& path, const char* key) {
    const json& value = get_present(obj, path, key);
    if (!value.is_number()) {
        throw Error(ErrorCode::SchemaError, "'" + path + "." + key + "' must be a number");
    }
    return value.get<double>();
}

[[nodiscard]] inline double get_number_or(const json& obj,
                                          const std::string& path,
                                          const char* key,
                                          double fallback) {
    return obj.contains(key) ? get_number(obj, path, key) : fallback;
}

[[nodiscard]] inline std::string get_string(const json& obj,
                                            const std::string& path,
                                            const char* key) {
    const json& value = get_present(obj, path, key);
    if (!value.is_string()) {
        throw Error(ErrorCode::SchemaError, "'" + path + "." + key + "' must be a string");
    }
    return value.get<std::string>();
}

[[nodiscard]] inline std::vector<double> get_number_array(const json& obj,
                                                          const std::string& path,
                                                          const char* key) {
    const json& value = get_present(obj, path, key);
    if (!value.is_array() || value.empty()) {
        throw Error(ErrorCode::SchemaError, "'" + path + "." + key + "' must be a non-empty array");
    }
    std::vector<double> out;
    out.reserve(value.size());
    for (const json& item : value) {
        if (!item.is_number()) {
            throw Error(ErrorCode::SchemaError,
                        "'" + path + "." + key + "' must contain numbers only");
        }
        out.push_back(item.get<double>());
    }
    return out;
}

[[nodiscard]] inline NodeSpec parse_node(const json& node, const std::string& path) {
    const std::string kind = get_string(node, path, "kind");
    if (kind == "generator") {
        require_keys(node, path, {"id", "kind", "M", "D", "P_star"},
                     {"id", "kind", "M", "D", "P_star"});
        GeneratorSpec gen;
        gen.id = get_string(node, path, "id");
        gen.inertia = get_number(node, path, "M");
        gen.damping = get_number(node, path, "D");
        gen.nominal_power = get_number(node, path, "P_star");
        return gen;
    }
    if (kind == "inverter") {
        require_keys(node, path, {"id", "kind", "P_star"}, {"id", "kind", "P_star"});
        return InverterSpec{get_string(node, path, "id"), get_number(node, path, "P_star")};
    }
    if (kind == "load") {
        require_keys(node, path, {"id", "kind", "P_star"}, {"id", "kind", "P_star"});
        return LoadSpec{get_string(node, path, "id"), get_number(node, path, "P_star")};
    }
    throw Error(ErrorCode::SchemaError,
                "'" + path + ".kind' must be generator, inverter, or load");
}

}  // namespace detail

/// Parses and validates a scenario document. The schema is strict: unknown
/// keys anywhere are rejected so typos cannot silently change a run.
[[nodiscard]] inline Scenario parse_scenario_text(const std::string& text,
                                                  const std::string& default_name) {
    using detail::json;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError,
                    std::string(e.what()) + " (" + detail::line_column_of(text, e.byte) + ")");
    }

    detail::require_keys(doc, "$",
                         {"name", "network", "controller", "events", "integrator", "costs",
                          "device"},
                         {"network", "controller", "integrator"});

    Scenario scn;
    scn.name = doc.contains("name") ? detail::get_string(doc, "$", "name") : default_name;

    const json& network = doc.at("network");
    detail::require_keys(network, "network", {"nodes", "edges"}, {"nodes", "edges"});
    if (!network.at("nodes").is_array() || !network.at("edges").is_array()) {
        throw Error(ErrorCode::SchemaError, "'network.nodes' and 'network.edges' must be arrays");
    }
    std::size_t index = 0;
    for (const json& node : network.at("nodes")) {
        scn.network.nodes.push_back(
            detail::parse_node(node, "network.nodes[" + std::to_string(index++) + "]"));
    }
    index = 0;
    for (const json& edge : network.at("edges")) {
        const std::string path = "network.edges[" + std::to_string(index++) + "]";
        detail::require_keys(edge, path, {"from", "to", "reactance"},
                             {"from", "to", "reactance"});
        scn.network.edges.push_back(EdgeSpec{detail::get_string(edge, path, "from"),
                                             detail::get_string(edge, path, "to"),
                                             detail::get_number(edge, path, "reactance")});
    }

    const json& controller = doc.at("controller");
    detail::require_keys(controller, "controller",
                         {"mode", "u_bar", "alpha", "beta", "gamma", "xi",
                          "allow_nonpositive_xi"},
                         {"mode", "gamma", "xi"});
    const std::string mode = detail::get_string(controller, "controller", "mode");
    if (mode == "constant-input-pi") {
        scn.controller.mode = ControllerMode::ConstantInputPi;
    } else if (mode == "proportional") {
        scn.controller.mode = ControllerMode::Proportional;
    } else if (mode == "dual-pi") {
        scn.controller.mode = ControllerMode::DualPi;
    } else {
        throw Error(ErrorCode::SchemaError,
                    "'controller.mode' must be constant-input-pi, proportional, or dual-pi");
    }
    scn.controller.u_bar = detail::get_number_or(controller, "controller", "u_bar", 0.0);
    scn.controller.alpha = detail::get_number_or(controller, "controller", "alpha", 0.0);
    scn.controller.beta = detail::get_number_or(controller, "controller", "beta", 0.0);
    scn.controller.gamma = detail::get_number(controller, "controller", "gamma");
    scn.controller.xi = detail::get_number_array(controller, "controller", "xi");
    if (controller.contains("allow_nonpositive_xi")) {
        if (!controller.at("allow_nonpositive_xi").is_boolean()) {
            throw Error(ErrorCode::SchemaError,
                        "'controller.allow_nonpositive_xi' must be a boolean");
        }
        scn.controller.allow_nonpositive_xi = controller.at("allow_nonpositive_xi").get<bool>();
    }
    const double xi_sum =
        std::accumulate(scn.controller.xi.begin(), scn.controller.xi.end(), 0.0);
    if (std::abs(xi_sum - 1.0) > kSharingNormalizationTolerance) {
        throw Error(ErrorCode::SchemaError,
                    "'controller.xi' must sum to 1, got " + std::to_string(xi_sum));
    }

    if (doc.contains("events")) {
        if (!doc.at("events").is_array()) {
            throw Error(ErrorCode::SchemaError, "'events' must be an array");
        }
        index = 0;
        for (const json& event : doc.at("events")) {
            const std::string path = "events[" + std::to_string(index++) + "]";
            const std::string kind = detail::get_string(event, path, "kind");
            Event ev;
            ev.time = detail::get_number(event, path, "time");
            if (kind == "load-step") {
                detail::require_keys(event, path, {"time", "kind", "node", "delta"},
                                     {"time", "kind", "node", "delta"});
                ev.kind = EventKind::LoadStep;
                ev.node_id = detail::get_string(event, path, "node");
                ev.delta = detail::get_number(event, path, "delta");
            } else if (kind == "dispatch-ramp") {
                detail::require_keys(event, path, {"time", "kind", "target_u_bar", "rate"},
                                     {"time", "kind", "target_u_bar", "rate"});
                ev.kind = EventKind::DispatchRamp;
                ev.target_u_bar = detail::get_number(event, path, "target_u_bar");
                ev.rate = detail::get_number(event, path, "rate");
            } else {
                throw Error(ErrorCode::SchemaError,
                            "'" + path + ".kind' must be load-step or dispatch-ramp");
            }
            scn.events.push_back(std::move(ev));
        }
    }

    const json& integrator = doc.at("integrator");
    detail::require_keys(integrator, "integrator",
                         {"t_end", "step", "record_stride", "initial_state"}, {"t_end"});
    scn.integrator.t_end = detail::get_number(integrator, "integrator", "t_end");
    scn.integrator.step = detail::get_number_or(integrator, "integrator", "step", 1e-3);
    if (integrator.contains("record_stride")) {
        const json& stride = integrator.at("record_stride");
        if (!stride.is_number_unsigned() || stride.get<std::size_t>() == 0) {
            throw Error(ErrorCode::SchemaError,
                        "'integrator.record_stride' must be a positive integer");
        }
        scn.integrator.record_stride = stride.get<std::size_t>();
    }
    if (integrator.contains("initial_state")) {
        const json& init = integrator.at("initial_state");
        detail::require_keys(init, "integrator.initial_state", {"omega", "chi"}, {});
        scn.integrator.initial_state.omega =
            detail::get_number_or(init, "integrator.initial_state", "omega", 0.0);
        scn.integrator.initial_state.chi =
            detail::get_number_or(init, "integrator.initial_state", "chi", 0.0);
    }

    if (doc.contains("costs")) {
        scn.costs = CostMatrix{detail::get_number_array(doc, "$", "costs")};
    }
    if (doc.contains("device")) {
        const json& device = doc.at("device");
        detail::require_keys(device, "device", {"tau_pll", "tau_cc", "v_d"}, {});
        DeviceConfig dev;
        dev.tau_pll = detail::get_number_or(device, "device", "tau_pll", 0.0);
        dev.tau_cc = detail::get_number_or(device, "device", "tau_cc", 0.0);
        dev.v_d = detail::get_number_or(device, "device", "v_d", 1.0);
        if (dev.tau_pll < 0.0 || dev.tau_cc < 0.0) {
            throw Error(ErrorCode::SchemaError, "'device' time constants must be >= 0");
        }
        scn.device = dev;
    }

    (void)prepare_scenario(scn);  // network, controller, and event validation
    return scn;
}

[[nodiscard]] inline Scenario parse_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario_text(buffer.str(), path.stem().string());
}

/// Serializes a scenario back to the schema accepted by parse_scenario.
[[nodiscard]] inline nlohmann::json write_scenario(const Scenario& scn) {
    using detail::json;
    json doc;
    doc["name"] = scn.name;

    json nodes = json::array();
    for (const NodeSpec& node : scn.network.nodes) {
        json entry;
        if (const auto* gen = std::get_if<GeneratorSpec>(&node)) {
            entry = {{"id", gen->id},
                     {"kind", "generator"},
                     {"M", gen->inertia},
                     {"D", gen->damping},
                     {"P_star", gen->nominal_power}};
        } else if (const auto* inv = std::get_if<InverterSpec>(&node)) {
            entry = {{"id", inv->id}, {"kind", "inverter"}, {"P_star", inv->nominal_power}};
        } else {
            const auto& load = std::get<LoadSpec>(node);
            entry = {{"id", load.id}, {"kind", "load"}, {"P_star", load.nominal_power}};
        }
        nodes.push_back(std::move(entry));
    }
    json edges = json::array();
    for (const EdgeSpec& edge : scn.network.edges) {
        edges.push_back({{"from", edge.from}, {"to", edge.to}, {"reactance", edge.reactance}});
    }
    doc["network"] = {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};

    doc["controller"] = {{"mode", controller_mode_name(scn.controller.mode)},
                         {"u_bar", scn.controller.u_bar},
                         {"alpha", scn.controller.alpha},
                         {"beta", scn.controller.beta},
                         {"gamma", scn.controller.gamma},
                         {"xi", scn.controller.xi}};
    if (scn.controller.allow_nonpositive_xi) {
        doc["controller"]["allow_nonpositive_xi"] = true;
    }

    json events = json::array();
    for (const Event& ev : scn.events) {
        if (ev.kind == EventKind::LoadStep) {
            events.push_back({{"time", ev.time},
                              {"kind", "load-step"},
                              {"node", ev.node_id},
                              {"delta", ev.delta}});
        } else {
            events.push_back({{"time", ev.time},
                              {"kind", "dispatch-ramp"},
                              {"target_u_bar", ev.target_u_bar},
                              {"rate", ev.rate}});
        }
    }
    doc["events"] = std::move(events);

    doc["integrator"] = {{"t_end", scn.integrator.t_end},
                         {"step", scn.integrator.step},
                         {"record_stride", scn.integrator.record_stride},
                         {"initial_state",
                          {{"omega", scn.integrator.initial_state.omega},
                           {"chi", scn.integrator.initial_state.chi}}}};
    if (scn.costs) {
        doc["costs"] = scn.costs->lambda;
    }
    if (scn.device) {
        doc["device"] = {{"tau_pll", scn.device->tau_pll},
                         {"tau_cc", scn.device->tau_cc},
                         {"v_d", scn.device->v_d}};
    }
    return doc;
}

/// Trajectory CSV: one row per sample, doubles printed with 17 significant
/// digits so the binary values round-trip exactly.
inline void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
    out << "t,omega,chi,u,v,v1,v2";
    for (std::size_t i = 1; i <= traj.inverter_count(); ++i) {
        out << ",upsilon_" << i;
    }
    out << ",P_e";
    for (std::size_t i = 1; i <= traj.inverter_count(); ++i) {
        out << ",P_I_" << i;
    }
    for (std::size_t i = 1; i <= traj.load_count(); ++i) {
        out << ",P_L_" << i;
    }
    out << ",W,Wdot_residual\n";

    char buffer[40];
    for (std::size_t k = 0; k < traj.sample_count(); ++k) {
        const auto put = [&](double value) {
            std::snprintf(buffer, sizeof(buffer), ",%.17g", value);
            out << buffer;
        };
        std::snprintf(buffer, sizeof(buffer), "%.17g", traj.time[k]);
        out << buffer;
        put(traj.omega[k]);
        put(traj.chi[k]);
        put(traj.u[k]);
        put(traj.v[k]);
        put(traj.v1[k]);
        put(traj.v2[k]);
        for (std::size_t i = 0; i < traj.inverter_count(); ++i) {
            put(traj.upsilon[i][k]);
        }
        put(traj.p_e[k]);
        for (std::size_t i = 0; i < traj.inverter_count(); ++i) {
            put(traj.p_inverter[i][k]);
        }
        for (std::size_t i = 0; i < traj.load_count(); ++i) {
            put(traj.p_load[i][k]);
        }
        put(traj.lyapunov[k]);
        put(traj.wdot_residual[k]);
        out << '\n';
    }
}

inline void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
    }
    write_trajectory_csv(traj, out);
}

}  // namespace swingsim
