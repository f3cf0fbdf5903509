#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "kalmreg/kalmreg.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitPipelineError = 2;

int run_command(const std::string& config_path, const std::string& out_dir,
                std::size_t parallel) {
    kalmreg::ExperimentConfig config;
    try {
        config = kalmreg::load_config(config_path);
    } catch (const kalmreg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }
    try {
        kalmreg::RunOptions options;
        options.parallelism = parallel;
        if (!out_dir.empty()) options.output_dir = out_dir;
        const kalmreg::ExperimentOutcome outcome = kalmreg::run_experiment(config, options);

        const auto& report = outcome.report;
        std::cout << "optimal candidate: " << report.selection.optimal_id
                  << " (min_area=" << kalmreg::format_double(report.selection.min_area) << ")\n";
        for (const auto& failure : outcome.failures)
            std::cout << "candidate " << failure.id << " failed in stage " << failure.stage
                      << ": " << failure.message << "\n";
        std::cout << "\n" << kalmreg::metrics_markdown(report);
        const std::filesystem::path dir = options.output_dir.value_or(config.output_dir);
        std::cout << "\nartifacts written to " << dir.string() << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "pipeline error: " << e.what() << "\n";
        return kExitPipelineError;
    }
}

int validate_command(const std::string& config_path) {
    try {
        const kalmreg::ExperimentConfig config = kalmreg::load_config(config_path);
        std::cout << "config ok (digest " << kalmreg::config_digest(config) << ")\n";
        return kExitOk;
    } catch (const kalmreg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }
}

int curves_command(const std::string& from, const std::string& out,
                   const std::string& scalarization) {
    try {
        kalmreg::WeightScalarization mode = kalmreg::WeightScalarization::Norm;
        if (scalarization == "first_coordinate")
            mode = kalmreg::WeightScalarization::FirstCoordinate;
        else if (scalarization == "mean")
            mode = kalmreg::WeightScalarization::Mean;
        else if (scalarization != "norm")
            throw kalmreg::ConfigError("scalarization: expected norm, first_coordinate, or mean");

        const kalmreg::Trajectory trajectory = kalmreg::read_trajectory_csv(from);
        const std::string id = std::filesystem::path(from).stem().string();
        const kalmreg::Curve curve = kalmreg::build_curve(trajectory, id, mode);
        kalmreg::write_curve_csv(curve, out);
        std::cout << "wrote " << out << " (" << curve.points.size()
                  << " points, auc=" << kalmreg::format_double(kalmreg::auc_trapezoid(curve))
                  << ")\n";
        return kExitOk;
    } catch (const kalmreg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "pipeline error: " << e.what() << "\n";
        return kExitPipelineError;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SGD linear regression with Kalman-consolidated weights and "
                 "minimum-curve-area model selection"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::size_t parallel = 1;
    CLI::App* run = app.add_subcommand("run", "run a full experiment from a config file");
    run->add_option("--config", config_path, "experiment config JSON")->required();
    run->add_option("--out", out_dir, "output directory (overrides the config)");
    run->add_option("--parallel", parallel, "candidate training parallelism")
        ->check(CLI::Range(std::size_t{1}, std::size_t{256}));

    std::string validate_path;
    CLI::App* validate = app.add_subcommand("validate", "check a config file and print its digest");
    validate->add_option("--config", validate_path, "experiment config JSON")->required();

    std::string curves_from;
    std::string curves_out;
    std::string curves_mode = "norm";
    CLI::App* curves =
        app.add_subcommand("curves", "re-emit weight-versus-loss plot data from a trajectory CSV");
    curves->add_option("--from", curves_from, "trajectory CSV")->required();
    curves->add_option("--out", curves_out, "curve CSV to write")->required();
    curves->add_option("--scalarization", curves_mode, "norm, first_coordinate, or mean");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfigError;
    }

    if (run->parsed()) return run_command(config_path, out_dir, parallel);
    if (validate->parsed()) return validate_command(validate_path);
    if (curves->parsed()) return curves_command(curves_from, curves_out, curves_mode);
    return kExitConfigError;
}
