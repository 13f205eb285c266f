#include "kpiguard/cli.hpp"
#include "kpiguard/error.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace fs = std::filesystem;
using namespace kpiguard;

namespace {

ExperimentConfig resolve_config(const std::string& path, const std::optional<std::uint64_t>& seed) {
    ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : load_config(path);
    if (seed)
        cfg.seed = *seed;
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Failure prediction and localization for multi-node systems"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string mode_name;
    int loud_n = 0;
    bool dry_run = false;
    std::string trace, bundle_dir, manifest;
    std::vector<std::string> verdict_files;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "Experiment config file")->check(CLI::ExistingFile);
        cmd->add_option("--seed", seed, "Overrides experiment.seed");
    };

    auto* simulate = app.add_subcommand("simulate", "Generate normal and failing traces");
    add_common(simulate);
    simulate->add_option("--out", out, "Output directory")->required();
    simulate->add_flag("--dry-run", dry_run, "Validate and print the plan without writing");

    auto* train = app.add_subcommand("train", "Train a model bundle from a normal trace");
    add_common(train);
    train->add_option("--trace", trace, "Normal trace CSV")->required();
    train->add_option("--out", out, "Bundle directory")->required();

    auto* predict = app.add_subcommand("predict", "Write a verdict stream for a trace");
    predict->add_option("--bundle", bundle_dir, "Bundle directory")->required();
    predict->add_option("--trace", trace, "Trace CSV")->required();
    predict->add_option("--mode", mode_name, "e, a, ensemble or loud")->required();
    predict->add_option("--loud-n", loud_n, "Persistence N for loud mode");
    predict->add_option("--out", out, "Verdict CSV")->required();

    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score verdict streams against a manifest");
    evaluate_cmd->add_option("--verdicts", verdict_files, "Verdict CSV files (replications)")->required();
    evaluate_cmd->add_option("--manifest", manifest, "Ground-truth manifest; omit for an all-normal trace");
    evaluate_cmd->add_option("--out", out, "Metrics CSV")->required();

    auto* experiment = app.add_subcommand("experiment", "Simulate, train, predict and evaluate end to end");
    add_common(experiment);
    experiment->add_option("--out", out, "Run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_code(ErrorKind::Usage);
    }

    try {
        if (*simulate) {
            const auto plan = cmd_simulate(resolve_config(config_path, seed), out, dry_run, std::cout);
            if (!dry_run)
                std::cout << plan.size() << " traces written to " << out << '\n';
        } else if (*train) {
            cmd_train(trace, resolve_config(config_path, seed), out, std::cout);
        } else if (*predict) {
            const Mode mode = Mode::parse(mode_name, loud_n);
            const auto n = cmd_predict(bundle_dir, trace, mode, out);
            std::cout << n << " verdicts written to " << out << '\n';
        } else if (*evaluate_cmd) {
            std::vector<fs::path> files(verdict_files.begin(), verdict_files.end());
            std::optional<fs::path> m;
            if (!manifest.empty())
                m = manifest;
            const auto rows = cmd_evaluate(files, m, out);
            std::cout << metrics_header() << '\n';
            for (const auto& r : rows)
                std::cout << metrics_row(r) << '\n';
        } else if (*experiment) {
            cmd_experiment(resolve_config(config_path, seed), out, std::cout);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(ErrorKind::Data);
    }
    return 0;
}
