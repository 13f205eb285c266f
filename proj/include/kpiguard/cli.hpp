#pragma once

#include "kpiguard/config.hpp"
#include "kpiguard/eval.hpp"
#include "kpiguard/pipeline.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace kpiguard {

/// One simulated trace: the normal training/holdout traces or a failing replication.
struct TracePlan {
    std::string experiment;          ///< scenario id, "train" or "holdout"
    std::size_t replication = 0;
    std::filesystem::path trace;     ///< relative to the data directory
    std::optional<std::filesystem::path> manifest;
    std::int64_t workload_start = 0; ///< minutes after Monday 00:00
    std::int64_t minutes = 0;
    std::uint64_t workload_seed = 0;
    std::uint64_t telemetry_seed = 0;
    std::optional<FaultSpec> fault;
};

std::vector<TracePlan> simulation_plan(const ExperimentConfig& cfg);

/// Writes train.csv, holdout.csv and faults/<id>_r<k>.csv with manifests into `out_dir`.
/// With `dry_run` the plan is printed to `log` and nothing is written.
std::vector<TracePlan> cmd_simulate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, bool dry_run,
                                    std::ostream& log);

/// Trains a bundle from a normal trace and writes it plus train.log to `out_dir`.
PipelineBundle cmd_train(const std::filesystem::path& normal_trace, const ExperimentConfig& cfg,
                         const std::filesystem::path& out_dir, std::ostream& log);

/// Runs one mode over a trace and writes the verdict CSV; returns the verdict count.
std::size_t cmd_predict(const std::filesystem::path& bundle_dir, const std::filesystem::path& trace, const Mode& mode,
                        const std::filesystem::path& out);

/// One metrics row per verdict file, plus a median row when several are given.
/// Without a manifest every trace is treated as all-normal (FAR only).
std::vector<MetricsReport> cmd_evaluate(const std::vector<std::filesystem::path>& verdicts,
                                        const std::optional<std::filesystem::path>& manifest,
                                        const std::filesystem::path& out);

struct TraceResult {
    std::string experiment;
    std::size_t replication = 0;
    std::optional<GroundTruth> truth;
    std::map<std::string, std::vector<Verdict>> verdicts; ///< by mode name
    std::map<std::string, MetricsReport> metrics;         ///< by mode name
};

struct ExperimentResult {
    std::vector<TraceResult> traces;
    std::vector<MetricsReport> medians; ///< one per experiment x mode
    std::filesystem::path metrics_csv;
    bool resumed = false;
};

/// The modes an experiment evaluates, with loud expanded over every configured N.
std::vector<Mode> experiment_modes(const ExperimentConfig& cfg);

/// simulate -> train -> predict every mode -> evaluate. Reuses `out_dir/bundle` when it was
/// trained from the same configuration.
ExperimentResult cmd_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

} // namespace kpiguard
