// pnpcert run --config PATH [--out-dir PATH] [--jobs N] [--seed-override S] [--validate-only]
// pnpcert validate --config PATH
//
// Exit codes: 0 all certificates pass, 1 an assertion failed, 2 config or
// usage error, 3 a run aborted (divergence or inversion failure).
#include "pnpcert/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

namespace {

void print_validation(const pnpcert::ExperimentConfig& cfg, const std::vector<pnpcert::ValidationLine>& lines) {
    std::cout << "config '" << cfg.name << "': " << lines.size() << " instance(s), iterations " << cfg.iterations
              << "\n";
    for (const auto& l : lines) {
        std::printf("instance %d: L_f = %.6g, lambda = %.6g, lambda * L_f = %.6g < 1, estimated L = %.6g\n",
                    l.instance, l.L_f, l.lambda, l.lambda_Lf, l.L);
    }
    std::cout << "config OK\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Convergence certificates for plug-and-play proximal gradient descent"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    int jobs = 1;
    std::optional<std::uint64_t> seed_override;
    bool validate_only = false;

    auto* run = app.add_subcommand("run", "run an experiment config and write traces, certificates and summary.csv");
    run->add_option("--config", config_path, "experiment config (JSON)")->required();
    run->add_option("--out-dir", out_dir, "output directory (overrides out_dir in the config)");
    run->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    run->add_option("--seed-override", seed_override, "replace the config seed");
    run->add_flag("--validate-only", validate_only, "check the config without running");

    auto* validate = app.add_subcommand("validate", "check a config and print L_f, lambda * L_f and L");
    validate->add_option("--config", config_path, "experiment config (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        auto cfg = pnpcert::load_config(config_path);
        if (seed_override) cfg.seed = *seed_override;
        if (validate->parsed() || validate_only) {
            print_validation(cfg, pnpcert::validate_config(cfg));
            return 0;
        }
        const std::filesystem::path out = out_dir.empty() ? std::filesystem::path(cfg.out_dir) : std::filesystem::path(out_dir);
        const auto outcome = pnpcert::run_experiment(cfg, out, jobs);
        std::size_t certs = 0;
        for (const auto& r : outcome.instances) certs += r.certificates.size();
        std::cout << "wrote " << certs << " certificate(s) for " << outcome.instances.size() << " instance(s) to "
                  << out.string() << "\n";
        if (outcome.exit_code == 0) std::cout << "all derived bounds hold\n";
        return outcome.exit_code;
    } catch (const pnpcert::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const pnpcert::NonConvergence& e) {
        std::cerr << "runtime abort: " << e.what() << "\n";
        return 3;
    } catch (const pnpcert::DivergenceError& e) {
        std::cerr << "runtime abort: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime abort: " << e.what() << "\n";
        return 3;
    }
}
