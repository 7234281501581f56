// swingsim - microgrid frequency-control simulator CLI.
//
// Subcommands:
//   run <scenario.json> --out <dir>   simulate one scenario, write CSV + report
//   batch <dir> [--out <root>]        run every *.json in a directory in parallel
//   reproduce-paper [--out <dir>]     built-in reference experiment with assertions
//   optimal-xi --costs <list>         print the cost-optimal sharing vector
//
// Exit codes: 0 all checks pass, 2 validation error, 3 assertion failure,
// 4 numerical divergence.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "swingsim/swingsim.hpp"

namespace fs = std::filesystem;

namespace {

int report_error(const swingsim::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return swingsim::exit_code_for(err.code());
}

int cmd_run(const std::string& scenario_path, const std::string& out_dir) {
    try {
        const swingsim::RunReport report = swingsim::run(scenario_path, out_dir);
        std::cout << swingsim::render_report(report);
        std::cout << "wrote " << (fs::path(out_dir) / "trajectory.csv").string() << "\n";
        return report.all_checks_pass ? 0 : 3;
    } catch (const swingsim::Error& err) {
        return report_error(err);
    }
}

int cmd_batch(const std::string& dir, std::string out_root) {
    if (out_root.empty()) {
        out_root = dir;
    }
    std::vector<fs::path> scenarios;
    try {
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".json") {
                scenarios.push_back(entry.path());
            }
        }
    } catch (const fs::filesystem_error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    }
    std::sort(scenarios.begin(), scenarios.end());
    if (scenarios.empty()) {
        std::cerr << "error: no *.json scenarios in '" << dir << "'\n";
        return 2;
    }

    struct Outcome {
        fs::path path;
        int exit_code = 0;
        std::string message;
    };
    std::vector<std::future<Outcome>> jobs;
    jobs.reserve(scenarios.size());
    for (const fs::path& path : scenarios) {
        jobs.push_back(std::async(std::launch::async, [path, out_root]() {
            Outcome outcome{path, 0, {}};
            try {
                const fs::path out_dir = fs::path(out_root) / (path.stem().string() + ".out");
                const swingsim::RunReport report = swingsim::run(path, out_dir);
                outcome.exit_code = report.all_checks_pass ? 0 : 3;
                outcome.message = report.all_checks_pass ? "ok" : "checks failed";
            } catch (const swingsim::Error& err) {
                outcome.exit_code = swingsim::exit_code_for(err.code());
                outcome.message = err.what();
            }
            return outcome;
        }));
    }

    int worst = 0;
    for (auto& job : jobs) {
        const Outcome outcome = job.get();
        std::cout << (outcome.exit_code == 0 ? "pass" : "FAIL") << "  "
                  << outcome.path.filename().string() << "  " << outcome.message << "\n";
        worst = std::max(worst, outcome.exit_code);
    }
    return worst;
}

int cmd_reproduce(const std::string& out_dir) {
    try {
        const swingsim::PaperReport paper = swingsim::reproduce_paper();
        const std::string text = swingsim::render_paper_report(paper);
        std::cout << text;
        if (!out_dir.empty()) {
            fs::create_directories(out_dir);
            swingsim::Trajectory traj;
            (void)swingsim::run_scenario(paper.scenario, &traj);
            swingsim::write_trajectory_csv(traj, fs::path(out_dir) / "trajectory.csv");
            std::ofstream report_file(fs::path(out_dir) / "report.txt");
            report_file << text;
        }
        if (!paper.all_passed) {
            return 3;
        }
        return paper.run.all_checks_pass ? 0 : 3;
    } catch (const swingsim::Error& err) {
        return report_error(err);
    }
}

int cmd_optimal_xi(const std::string& costs_arg) {
    try {
        swingsim::CostMatrix costs;
        std::stringstream stream(costs_arg);
        std::string item;
        while (std::getline(stream, item, ',')) {
            try {
                costs.lambda.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw swingsim::Error(swingsim::ErrorCode::SchemaError,
                                      "cost list entry '" + item + "' is not a number");
            }
        }
        const std::vector<double> xi = swingsim::optimal_sharing(costs);
        char buffer[40];
        for (std::size_t i = 0; i < xi.size(); ++i) {
            std::snprintf(buffer, sizeof(buffer), "%.12g", xi[i]);
            std::cout << (i == 0 ? "" : " ") << buffer;
        }
        std::cout << "\n";
        return 0;
    } catch (const swingsim::Error& err) {
        return report_error(err);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"swingsim - communication-free master-slave microgrid simulator"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir;
    auto* run_cmd = app.add_subcommand("run", "simulate a scenario file");
    run_cmd->add_option("scenario", scenario_path, "scenario JSON file")->required();
    run_cmd->add_option("--out", out_dir, "output directory")->required();

    std::string batch_dir;
    std::string batch_out;
    auto* batch_cmd = app.add_subcommand("batch", "run every scenario in a directory");
    batch_cmd->add_option("dir", batch_dir, "directory with *.json scenarios")->required();
    batch_cmd->add_option("--out", batch_out, "output root (default: scenario directory)");

    std::string reproduce_out;
    auto* reproduce_cmd =
        app.add_subcommand("reproduce-paper", "run the built-in reference experiment");
    reproduce_cmd->add_option("--out", reproduce_out, "optional output directory");

    std::string costs_arg;
    auto* xi_cmd = app.add_subcommand("optimal-xi", "print the cost-optimal sharing vector");
    xi_cmd->add_option("--costs", costs_arg, "comma-separated cost coefficients")->required();

    CLI11_PARSE(app, argc, argv);

    if (run_cmd->parsed()) {
        return cmd_run(scenario_path, out_dir);
    }
    if (batch_cmd->parsed()) {
        return cmd_batch(batch_dir, batch_out);
    }
    if (reproduce_cmd->parsed()) {
        return cmd_reproduce(reproduce_out);
    }
    if (xi_cmd->parsed()) {
        return cmd_optimal_xi(costs_arg);
    }
    return 2;
}
