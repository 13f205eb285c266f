#include "kpiguard/cli.hpp"

#include "kpiguard/error.hpp"
#include "kpiguard/serialize.hpp"
#include "kpiguard/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace kpiguard {

namespace fs = std::filesystem;

namespace {

constexpr std::int64_t kMinutesPerWeek = 7 * 24 * 60;
constexpr const char* kConfigEcho = "config.ini";

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        return {};
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out)
        throw IoError("write failed for " + path.string());
}

std::vector<FaultScenario> selected_scenarios(const SimulationConfig& sim) {
    std::vector<FaultScenario> out;
    for (const auto& s : reference_fault_matrix()) {
        const bool kind = std::find(sim.kinds.begin(), sim.kinds.end(), s.kind) != sim.kinds.end();
        const bool pattern = std::find(sim.patterns.begin(), sim.patterns.end(), s.pattern) != sim.patterns.end();
        if (kind && pattern)
            out.push_back(s);
    }
    return out;
}

} // namespace

std::vector<TracePlan> simulation_plan(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto& sim = cfg.simulation;
    std::vector<TracePlan> plan;
    plan.push_back({"train", 0, "train.csv", std::nullopt, 0, sim.train_minutes,
                    stream_seed(cfg.seed, SeedStream::TrainWorkload), stream_seed(cfg.seed, SeedStream::TrainTelemetry),
                    std::nullopt});
    plan.push_back({"holdout", 0, "holdout.csv", std::nullopt, sim.train_minutes, sim.holdout_minutes,
                    stream_seed(cfg.seed, SeedStream::HoldoutWorkload),
                    stream_seed(cfg.seed, SeedStream::HoldoutTelemetry), std::nullopt});
    const auto scenarios = selected_scenarios(sim);
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        const auto& sc = scenarios[s];
        const std::int64_t horizon = std::max(sc.inject_to_crash, sim.min_horizon);
        for (std::size_t r = 0; r < sim.replications; ++r) {
            const std::uint64_t index = (static_cast<std::uint64_t>(s) << 20) | r;
            TracePlan p;
            p.experiment = sc.id;
            p.replication = r;
            const std::string stem = sc.id + "_r" + std::to_string(r);
            p.trace = fs::path("faults") / (stem + ".csv");
            p.manifest = fs::path("faults") / (stem + ".manifest.csv");
            p.workload_start =
                static_cast<std::int64_t>(stream_seed(cfg.seed, SeedStream::Fault, 4 * index + 2) % kMinutesPerWeek);
            p.workload_seed = stream_seed(cfg.seed, SeedStream::Fault, 4 * index);
            p.telemetry_seed = stream_seed(cfg.seed, SeedStream::Fault, 4 * index + 1);
            p.minutes = sc.start_to_inject + static_cast<std::int64_t>(std::ceil(sim.tail_factor * horizon)) + 1;
            p.fault = fault_for_horizon(sc.kind, sc.pattern, r % sim.pairs, sc.start_to_inject, horizon,
                                        stream_seed(cfg.seed, SeedStream::Fault, 4 * index + 3));
            plan.push_back(std::move(p));
        }
    }
    return plan;
}

std::vector<TracePlan> cmd_simulate(const ExperimentConfig& cfg, const fs::path& out_dir, bool dry_run,
                                    std::ostream& log) {
    const auto plan = simulation_plan(cfg);
    const ClusterSpec cluster = cfg.cluster();
    if (dry_run) {
        log << "plan: " << plan.size() << " traces, " << cluster.nodes().size() * cluster.metrics.size()
            << " KPIs, seed " << cfg.seed << '\n';
        for (const auto& p : plan) {
            log << "  " << p.trace.string() << ' ' << p.minutes << " min from minute " << p.workload_start;
            if (p.fault)
                log << ", " << to_string(p.fault->kind) << '/' << to_string(p.fault->pattern) << " on "
                    << cluster.pairs[p.fault->pair].first << '+' << cluster.pairs[p.fault->pair].second << " at t="
                    << p.fault->start;
            log << '\n';
        }
        return plan;
    }
    fs::create_directories(out_dir / "faults");
    for (const auto& p : plan) {
        const auto workload = gen_workload(static_cast<std::size_t>(p.minutes), p.workload_seed, p.workload_start);
        Series series = gen_normal_telemetry(cluster, workload, p.telemetry_seed);
        if (p.fault) {
            auto [failing, truth] = inject_fault(series, cluster, *p.fault);
            write_series(failing, out_dir / p.trace);
            write_manifest({truth}, out_dir / *p.manifest);
        } else {
            write_series(series, out_dir / p.trace);
        }
        log << "wrote " << (out_dir / p.trace).string() << '\n';
    }
    return plan;
}

PipelineBundle cmd_train(const fs::path& normal_trace, const ExperimentConfig& cfg, const fs::path& out_dir,
                         std::ostream& log) {
    cfg.validate();
    const Series normal = load_series(normal_trace);
    if (normal.size() < 20)
        throw InsufficientDataError(normal_trace.string() + ": training needs at least 20 snapshots, got " +
                                    std::to_string(normal.size()));
    const auto cut = std::clamp<std::size_t>(
        static_cast<std::size_t>(cfg.simulation.split * static_cast<double>(normal.size())), 1, normal.size() - 1);
    const Timestamp boundary = normal.timestamp(cut);

    const PipelineBundle bundle = train_bundle(normal, boundary, cfg.seeded_bundle());
    save_bundle(bundle, out_dir);
    write_text(out_dir / kConfigEcho, format_config(cfg));

    std::ostringstream tl;
    tl << "seed " << cfg.seed << '\n';
    tl << "trace " << normal_trace.string() << " snapshots " << normal.size() << " boundary " << boundary << '\n';
    tl << "catalog " << bundle.catalog->hash_hex() << " kpis " << bundle.catalog->size() << '\n';
    tl << "autoencoder_loss";
    for (double l : bundle.autoencoder.loss_history)
        tl << ' ' << format_double(l);
    tl << "\nrbm_loss";
    for (double l : bundle.rbm.loss_history)
        tl << ' ' << format_double(l);
    tl << "\nrbm_energy mean " << format_double(bundle.rbm.energy_mean) << " std " << format_double(bundle.rbm.energy_std)
       << " threshold " << format_double(bundle.rbm.threshold) << '\n';
    tl << "ocsvm support " << bundle.ocsvm.support.size() << " rho " << format_double(bundle.ocsvm.rho) << " kkt_gap "
       << format_double(bundle.ocsvm.kkt_gap) << " iterations " << bundle.ocsvm.iterations << '\n';
    tl << "granger edges " << bundle.baseline.edges().size() << " failed_pairs " << bundle.baseline.failed_pairs << '\n';
    write_text(out_dir / "train.log", tl.str());
    log << "trained bundle in " << out_dir.string() << " (seed " << cfg.seed << ", "
        << bundle.baseline.edges().size() << " causal edges)\n";
    return bundle;
}

std::size_t cmd_predict(const fs::path& bundle_dir, const fs::path& trace, const Mode& mode, const fs::path& out) {
    const PipelineBundle bundle = load_bundle(bundle_dir);
    const Series series = load_series(trace, bundle.catalog.get());
    const auto verdicts = run_pipeline(bundle, series, mode);
    write_verdicts(verdicts, out);
    return verdicts.size();
}

std::vector<MetricsReport> cmd_evaluate(const std::vector<fs::path>& verdict_files,
                                        const std::optional<fs::path>& manifest, const fs::path& out) {
    if (verdict_files.empty())
        throw UsageError("evaluate needs at least one verdict file");
    std::optional<GroundTruth> truth;
    if (manifest) {
        const auto truths = read_manifest(*manifest);
        if (truths.size() != 1)
            throw SchemaError(manifest->string() + ": expected exactly one ground-truth row, found " +
                              std::to_string(truths.size()));
        truth = truths.front();
    }
    std::vector<MetricsReport> rows;
    for (const auto& file : verdict_files) {
        const auto verdicts = read_verdicts(file);
        const std::string source = verdicts.empty() ? "" : to_string(verdicts.front().source);
        rows.push_back(evaluate(verdicts, truth, file.stem().string(), source));
    }
    if (rows.size() > 1) {
        MetricsReport median = median_report(rows);
        median.experiment = "median";
        rows.push_back(std::move(median));
    }
    write_metrics(rows, out);
    return rows;
}

std::vector<Mode> experiment_modes(const ExperimentConfig& cfg) {
    std::vector<Mode> modes;
    for (const auto& name : cfg.modes) {
        if (name == "loud") {
            for (int n : cfg.loud_n)
                modes.push_back(Mode::parse(name, n));
        } else {
            modes.push_back(Mode::parse(name));
        }
    }
    return modes;
}

ExperimentResult cmd_experiment(const ExperimentConfig& cfg, const fs::path& out_dir, std::ostream& log) {
    cfg.validate();
    const fs::path data = out_dir / "data";
    const fs::path bundle_dir = out_dir / "bundle";
    const fs::path verdict_dir = out_dir / "verdicts";
    const auto plan = cmd_simulate(cfg, data, false, log);

    ExperimentResult result;
    PipelineBundle bundle;
    if (fs::exists(bundle_dir / "bundle.json") && read_text(bundle_dir / kConfigEcho) == format_config(cfg)) {
        bundle = load_bundle(bundle_dir);
        result.resumed = true;
        log << "resumed bundle from " << bundle_dir.string() << '\n';
    } else {
        bundle = cmd_train(data / "train.csv", cfg, bundle_dir, log);
    }

    fs::create_directories(verdict_dir);
    const auto modes = experiment_modes(cfg);
    std::vector<MetricsReport> rows;
    for (const auto& p : plan) {
        if (p.experiment == "train")
            continue;
        TraceResult tr;
        tr.experiment = p.experiment;
        tr.replication = p.replication;
        if (p.manifest)
            tr.truth = read_manifest(data / *p.manifest).at(0);
        const Series series = load_series(data / p.trace, bundle.catalog.get());
        const std::string stem = p.trace.stem().string();
        for (const auto& mode : modes) {
            auto verdicts = run_pipeline(bundle, series, mode);
            write_verdicts(verdicts, verdict_dir / (stem + "." + mode.name() + ".csv"));
            MetricsReport m = evaluate(verdicts, tr.truth, p.fault ? stem : p.experiment, mode.name());
            rows.push_back(m);
            tr.metrics.emplace(mode.name(), std::move(m));
            tr.verdicts.emplace(mode.name(), std::move(verdicts));
        }
        result.traces.push_back(std::move(tr));
    }

    std::vector<std::string> experiments;
    for (const auto& t : result.traces)
        if (t.truth && std::find(experiments.begin(), experiments.end(), t.experiment) == experiments.end())
            experiments.push_back(t.experiment);
    for (const auto& id : experiments) {
        for (const auto& mode : modes) {
            std::vector<MetricsReport> reps;
            for (const auto& t : result.traces)
                if (t.experiment == id)
                    reps.push_back(t.metrics.at(mode.name()));
            MetricsReport median = median_report(reps);
            median.experiment = id;
            median.source = mode.name();
            result.medians.push_back(std::move(median));
        }
    }
    rows.insert(rows.end(), result.medians.begin(), result.medians.end());
    result.metrics_csv = out_dir / "metrics.csv";
    write_metrics(rows, result.metrics_csv);

    log << "false alarm rate on held-out normal data:";
    for (const auto& t : result.traces)
        if (t.experiment == "holdout")
            for (const auto& mode : modes) {
                const auto& far = t.metrics.at(mode.name()).far_pct;
                log << ' ' << mode.name() << '=' << (far ? format_double(std::round(*far * 100.0) / 100.0) : "NA") << '%';
            }
    log << '\n' << "metrics written to " << result.metrics_csv.string() << '\n';
    return result;
}

} // namespace kpiguard
